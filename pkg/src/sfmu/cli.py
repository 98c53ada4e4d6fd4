"""Command-line front end.

    sfmu <train|retrain|estimate|unlearn|sweep|verify> --config <path> [--out <dir>]

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.
SFMU_THREADS caps sweep workers.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import data, estimator, evaluation
from .config import CONFIG_KEYS_HELP, ConfigError, RunConfig, load_config, write_manifest
from .errors import (
    BadMagic,
    DivergenceDetected,
    EmptyIndexSet,
    FractionOutOfRange,
    LabelOutOfRange,
    NotConverged,
    NotPositiveDefinite,
    SingularSystem,
    TruncatedFile,
)
from .losses import LOSS_CONSTANTS, SubsetLoss
from .trainer import retrain_oracle, train
from .unlearner import EstimatorSettings, UnlearnConfig, unlearn, unlearn_pipeline

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

_DATA_ERRORS = (FileNotFoundError, IsADirectoryError, BadMagic, TruncatedFile,
                LabelOutOfRange)
_NUMERIC_ERRORS = (NotConverged, SingularSystem, NotPositiveDefinite,
                   DivergenceDetected, EmptyIndexSet)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's 2
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="sfmu",
        description="Source-free machine unlearning toolkit",
        epilog="Config keys:\n" + CONFIG_KEYS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("train", "retrain", "estimate", "unlearn", "verify"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=(name != "verify"))
        p.add_argument("--out", default="out")
    p = sub.add_parser("sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="out")
    p.add_argument("--axis", required=True,
                   choices=("forget_fraction", "m", "lambda"))
    p.add_argument("--values", required=True,
                   help="comma-separated axis values")
    return parser


def _require_file(path: str, what: str) -> Path:
    if not path:
        raise ConfigError(f"config key {what!r} is required for this command")
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"{what} file not found: {p}")
    return p


def _load_problem(cfg: RunConfig):
    train_ds = data.load_features(_require_file(cfg.features, "features"),
                                  normalize=cfg.normalize)
    test_ds = data.load_features(_require_file(cfg.test_features, "test_features"),
                                 normalize=cfg.normalize)
    ds, train_idx, test_idx = data.stack_train_test(train_ds, test_ds)
    if cfg.split_dir:
        split = data.load_split(cfg.split_dir)
    else:
        split = data.make_split(train_idx, test_idx, cfg.forget_fraction,
                                cfg.split_seed)
    return ds, split


def _unlearn_config(cfg: RunConfig) -> UnlearnConfig:
    return UnlearnConfig(
        hessian_source=cfg.hessian_source,
        sigma=cfg.sigma,
        noise_seed=cfg.noise_seed,
        tau=cfg.tau,
        noise_convention=cfg.noise_convention,
    )


def _estimator_settings(cfg: RunConfig) -> EstimatorSettings:
    return EstimatorSettings(m=cfg.m, scale=cfg.eta, seed=cfg.probe_seed)


def cmd_train(cfg: RunConfig, out_dir: Path) -> int:
    ds, split = _load_problem(cfg)
    model = train(SubsetLoss(ds, split.train_idx, cfg.lam, cfg.loss))
    out_dir.mkdir(parents=True, exist_ok=True)
    data.save_model(out_dir / "model.bin", model.w)
    write_manifest(out_dir, cfg, "train",
                   extra={"grad_norm": model.metadata["grad_norm"]})
    print(f"wrote {out_dir / 'model.bin'}")
    return 0


def cmd_retrain(cfg: RunConfig, out_dir: Path) -> int:
    ds, split = _load_problem(cfg)
    model = retrain_oracle(ds, split, cfg.lam, cfg.loss)
    out_dir.mkdir(parents=True, exist_ok=True)
    data.save_model(out_dir / "model_retrained.bin", model.w)
    data.save_split(out_dir / "split", split)
    write_manifest(out_dir, cfg, "retrain",
                   extra={"grad_norm": model.metadata["grad_norm"]})
    print(f"wrote {out_dir / 'model_retrained.bin'}")
    return 0


def cmd_estimate(cfg: RunConfig, out_dir: Path) -> int:
    ds, split = _load_problem(cfg)
    model = train(SubsetLoss(ds, split.train_idx, cfg.lam, cfg.loss))
    forget_loss = SubsetLoss(ds, split.forget_idx, cfg.lam, cfg.loss)
    block = cfg.block_flag()
    if block is None:
        block = cfg.loss == "quadratic"
    pset = estimator.make_perturbation_set(
        forget_loss, model.w, m=cfg.m, scale=cfg.eta, seed=cfg.probe_seed,
        block=block, n_retain=len(split.retain_idx),
    )
    est = estimator.estimate_retain_hessian(pset)
    out_dir.mkdir(parents=True, exist_ok=True)
    data.save_hessian(out_dir / "hessian.bin", est.matrix)
    report = "\n".join([
        f"m={est.m}",
        f"eta={est.scale}",
        f"seed={est.seed}",
        f"residual={est.residual:.12e}",
        f"rescale={est.rescale}",
        f"dim={est.dim}",
        f"min_eigenvalue={est.report['min_eigenvalue']:.6e}",
        # Lemma-style error bound per unit loss-difference error eps.
        f"bound_per_eps={estimator.lemma1_bound(1.0, est.dim):.12e}",
    ]) + "\n"
    (out_dir / "estimate_report.txt").write_text(report)
    write_manifest(out_dir, cfg, "estimate")
    print(report, end="")
    return 0


def _evaluate_pair(ds, split, cfg: RunConfig, setting: str):
    """Retrained-oracle and unlearned rows for the current config."""
    retrained = retrain_oracle(ds, split, cfg.lam, cfg.loss)
    result = unlearn_pipeline(
        ds, split, cfg.lam, kind=cfg.loss, cfg=_unlearn_config(cfg),
        est=_estimator_settings(cfg), block=cfg.block_flag(),
    )
    tag = "unlearned(-)" if cfg.hessian_source == "estimated" else "unlearned(+)"
    rows = [
        evaluation.evaluate_model(retrained, ds, split, "retrained", setting,
                                  retain_loss=result.retain_loss,
                                  mia_seed=cfg.mia_seed),
        evaluation.evaluate_model(result.model_uf, ds, split, tag, setting,
                                  reference=retrained,
                                  retain_loss=result.retain_loss,
                                  mia_seed=cfg.mia_seed),
    ]
    return rows, result


def cmd_unlearn(cfg: RunConfig, out_dir: Path) -> int:
    ds, split = _load_problem(cfg)
    rows, result = _evaluate_pair(ds, split, cfg,
                                  setting=f"forget={split.n_forget}")
    out_dir.mkdir(parents=True, exist_ok=True)
    data.save_model(out_dir / "model_unlearned.bin", result.model_uf.w)
    if result.estimate is not None:
        data.save_hessian(out_dir / "hessian.bin", result.estimate.matrix)
    table = evaluation.emit_table(rows)
    (out_dir / "report.csv").write_text(table)
    (out_dir / "summary.txt").write_text(evaluation.summary_block(rows[-1]))
    write_manifest(out_dir, cfg, "unlearn")
    print(table, end="")
    return 0


def cmd_sweep(cfg: RunConfig, out_dir: Path, axis: str, values: list[str]) -> int:
    ds, split = _load_problem(cfg)

    def run_one(value: str):
        local = replace(cfg, raw=dict(cfg.raw))
        local_split = split
        if axis == "forget_fraction":
            local.forget_fraction = float(value)
            local_split = data.make_split(split.train_idx, split.test_idx,
                                          float(value), cfg.split_seed)
        elif axis == "m":
            local.m = int(value)
        else:
            local.lam = float(value)
        rows, _ = _evaluate_pair(ds, local_split, local,
                                 setting=f"{axis}={value}")
        return rows

    max_workers = int(os.environ.get("SFMU_THREADS", "0")) or None
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        per_value = list(pool.map(run_one, values))
    rows = [row for pair in per_value for row in pair]
    out_dir.mkdir(parents=True, exist_ok=True)
    table = evaluation.emit_table(rows)
    (out_dir / "sweep.csv").write_text(table)
    write_manifest(out_dir, cfg, f"sweep:{axis}={','.join(values)}")
    print(table, end="")
    return 0


def _verify_checks():
    """The verification battery over built-in synthetic fixtures."""
    rng = np.random.default_rng(7)

    def quartic_identity():
        for _ in range(3):
            m = rng.standard_normal((6, 6))
            check = estimator.verify_quartic_identity(0.5 * (m + m.T),
                                                      samples=200_000, seed=11)
            if abs(check.monte_carlo - check.closed_form) > 5 * check.std_error:
                return False
        return True

    def optimal_m():
        for eps in (0.0, 0.5, 1.0):
            for d in (2, 4):
                sol = estimator.verify_optimal_M(eps, d)
                expected = -(2.0 * eps / (2.0 + d)) * np.eye(d)
                if np.max(np.abs(sol - expected)) > 1e-6:
                    return False
        return True

    def _quadratic_fixture(seed=3, n=240, d=8, k=3, lam=0.1):
        ds = data.make_synthetic_classification(n, d, k, seed=seed)
        split = data.make_split(np.arange(200), np.arange(200, n), 0.1, seed)
        return ds, split, lam

    def lemma1_trend():
        ds, split, lam = _quadratic_fixture()
        model = train(SubsetLoss(ds, split.train_idx, lam))
        forget = SubsetLoss(ds, split.forget_idx, lam)
        retain = SubsetLoss(ds, split.retain_idx, lam)
        pset = estimator.make_perturbation_set(
            forget, model.w, m=120, seed=5, block=True, oracle_loss=retain)
        h_true = retain.hessian(block=True)
        errors = []
        for eps in (0.0, 0.1, 0.5, 1.0):
            corrupted = estimator.inject_corruption(pset, eps, seed=9)
            est = estimator.estimate_retain_hessian(corrupted)
            errors.append(float(np.linalg.norm(est.matrix - h_true)))
        if errors[0] > 1e-6 * np.linalg.norm(h_true):
            return False
        return all(b >= a - 1e-9 for a, b in zip(errors, errors[1:]))

    def quadratic_exactness():
        ds, split, lam = _quadratic_fixture(seed=17)
        model = train(SubsetLoss(ds, split.train_idx, lam))
        retain = SubsetLoss(ds, split.retain_idx, lam)
        forget = SubsetLoss(ds, split.forget_idx, lam)
        w_uf = unlearn(model, retain.hessian(block=True),
                       forget.gradient(model.w)).w
        retrained = retrain_oracle(ds, split, lam)
        rel = np.linalg.norm(w_uf - retrained.w) / np.linalg.norm(retrained.w)
        return rel <= 1e-8

    def theorem1():
        ds = data.make_synthetic_classification(240, 6, 3, seed=23)
        split = data.make_split(np.arange(200), np.arange(200, 240), 0.1, 23)
        result = unlearn_pipeline(ds, split, lam=0.1, kind="logistic",
                                  cfg=UnlearnConfig(hessian_source="exact"),
                                  block=False)
        consts = LOSS_CONSTANTS["logistic"]
        report = evaluation.theorem1_check(
            result.model_uf, result.retain_loss,
            gamma=consts["gamma"], grad_bound=consts["grad_bound"],
            lam=0.1, n=200, n_f=split.n_forget, eps=0.0, d=ds.dim * 3,
        )
        return report.holds

    return [
        ("quartic_trace_identity", quartic_identity),
        ("optimal_M_formula", optimal_m),
        ("lemma1_error_trend", lemma1_trend),
        ("quadratic_exactness", quadratic_exactness),
        ("theorem1_residual_bound", theorem1),
    ]


def cmd_verify(cfg: RunConfig | None, out_dir: Path) -> int:
    failures = 0
    for name, check in _verify_checks():
        ok = check()
        print(f"{'PASS' if ok else 'FAIL'} {name}")
        failures += 0 if ok else 1
    return EXIT_NUMERIC if failures else 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    out_dir = Path(args.out)
    try:
        if args.command == "verify":
            cfg = load_config(args.config) if args.config else None
            return cmd_verify(cfg, out_dir)
        cfg = load_config(args.config)
        if args.command == "train":
            return cmd_train(cfg, out_dir)
        if args.command == "retrain":
            return cmd_retrain(cfg, out_dir)
        if args.command == "estimate":
            return cmd_estimate(cfg, out_dir)
        if args.command == "unlearn":
            return cmd_unlearn(cfg, out_dir)
        if args.command == "sweep":
            values = [v for v in args.values.split(",") if v]
            if not values:
                raise ConfigError("--values must list at least one value")
            return cmd_sweep(cfg, out_dir, args.axis, values)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, FractionOutOfRange, ValueError) as exc:
        print(f"sfmu: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _DATA_ERRORS as exc:
        print(f"sfmu: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except _NUMERIC_ERRORS as exc:
        print(f"sfmu: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
