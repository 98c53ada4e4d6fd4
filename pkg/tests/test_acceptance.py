"""End-to-end acceptance checks.

Each test covers one headline guarantee of the toolkit and emits a single
[acceptance] PASS/FAIL line with the measured quantity, in addition to the
usual pytest verdict.
"""

import time

import numpy as np
import pytest

from sfmu import data
from sfmu.errors import RankDeficientProbes
from sfmu.estimator import (
    estimate_retain_hessian,
    inject_corruption,
    make_perturbation_set,
    verify_optimal_M,
    verify_quartic_identity,
)
from sfmu.evaluation import accuracy, mia_score, theorem1_check
from sfmu.losses import LOSS_CONSTANTS, SubsetLoss
from sfmu.trainer import retrain_oracle, train
from sfmu.unlearner import EstimatorSettings, UnlearnConfig, unlearn_pipeline


def _report(capsys, name, ok, detail=""):
    verdict = "PASS" if ok else "FAIL"
    with capsys.disabled():
        print(f"[acceptance] {name}: {verdict} {detail}".rstrip())
    assert ok, f"{name}: {detail}"


def _rel_dist(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def test_quadratic_removal_matches_retraining(capsys):
    """Exact-Hessian removal reproduces retraining on 50 random quadratic
    instances (n in [100, 1000], d in [5, 50], lam in [0.01, 1], forget
    fraction in [5%, 20%]) to relative error 1e-8."""
    rng = np.random.default_rng(2026)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(100, 1001))
        d = int(rng.integers(5, 51))
        k = int(rng.integers(2, 5))
        lam = float(rng.uniform(0.01, 1.0))
        frac = float(rng.uniform(0.05, 0.20))
        seed = int(rng.integers(1_000_000))
        ds = data.make_synthetic_classification(n + 40, d, k, seed=seed)
        split = data.make_split(np.arange(n), np.arange(n, n + 40), frac, seed)
        result = unlearn_pipeline(ds, split, lam)
        retrained = retrain_oracle(ds, split, lam)
        worst = max(worst, _rel_dist(result.model_uf.w, retrained.w))
    _report(capsys, "quadratic-exactness", worst <= 1e-8,
            f"worst_rel_err={worst:.3e} over 50 instances (tol 1e-8)")


def test_estimator_recovers_retain_hessian_from_oracle_differences(capsys):
    """With oracle retain-loss differences and m = d(d+1)/2 + d probes the
    PSD fit recovers the true retain Hessian to relative Frobenius error
    1e-6 for d up to 30."""
    worst = 0.0
    for d in (5, 10, 20, 30):
        ds = data.make_synthetic_classification(40 * d, d, 3, seed=d)
        split = data.make_split(np.arange(30 * d), np.arange(30 * d, 40 * d),
                                0.1, d)
        lam = 0.1
        forget = SubsetLoss(ds, split.forget_idx, lam)
        retain = SubsetLoss(ds, split.retain_idx, lam)
        w = train(SubsetLoss(ds, split.train_idx, lam)).w
        pset = make_perturbation_set(forget, w, m=d * (d + 1) // 2 + d,
                                     seed=d, block=True, oracle_loss=retain)
        est = estimate_retain_hessian(pset)
        worst = max(worst, _rel_dist(est.matrix, retain.hessian(block=True)))
    _report(capsys, "estimator-oracle-recovery", worst <= 1e-6,
            f"worst_rel_frobenius={worst:.3e} for d in (5,10,20,30) (tol 1e-6)")


def test_quartic_trace_identity_monte_carlo(capsys):
    """E[(z^T M z / 2)^2] = tr(M^2)/2 + tr(M)^2/4 for 20 random symmetric M
    (d <= 10), each checked against 1e6 Gaussian samples within 3 standard
    errors."""
    rng = np.random.default_rng(7)
    worst = 0.0
    for trial in range(20):
        d = int(rng.integers(1, 11))
        m = rng.standard_normal((d, d))
        check = verify_quartic_identity(0.5 * (m + m.T), samples=1_000_000,
                                        seed=trial)
        worst = max(worst, abs(check.monte_carlo - check.closed_form)
                    / check.std_error)
    _report(capsys, "quartic-identity", worst <= 3.0,
            f"worst_deviation={worst:.2f} standard errors over 20 matrices "
            "(tol 3)")


def test_optimal_corruption_minimizer_formula(capsys):
    """The numerical minimizer of tr(M^2 + 2 eps M)/2 + tr(M)^2/4 matches
    -(2 eps / (2 + d)) I entrywise to 1e-6 over a 4x4 grid of (eps, d)."""
    worst = 0.0
    for eps in (0.0, 0.5, 1.0, 3.0):
        for d in (1, 2, 4, 16):
            numeric = verify_optimal_M(eps, d)
            closed = -(2.0 * eps / (2.0 + d)) * np.eye(d)
            worst = max(worst, float(np.max(np.abs(numeric - closed))))
    _report(capsys, "optimal-M-formula", worst <= 1e-6,
            f"worst_entry_err={worst:.3e} over eps x d grid (tol 1e-6)")


def test_estimation_error_trend_under_injected_corruption(capsys):
    """Injecting corruption of magnitude eps into oracle loss differences
    yields a non-decreasing Hessian-estimation error over
    eps in {0, 0.1, 0.5, 1.0}, with zero error at eps = 0."""
    ds = data.make_synthetic_classification(240, 8, 3, seed=3)
    split = data.make_split(np.arange(200), np.arange(200, 240), 0.1, 3)
    lam = 0.1
    forget = SubsetLoss(ds, split.forget_idx, lam)
    retain = SubsetLoss(ds, split.retain_idx, lam)
    w = train(SubsetLoss(ds, split.train_idx, lam)).w
    pset = make_perturbation_set(forget, w, m=120, seed=5, block=True,
                                 oracle_loss=retain)
    h_true = retain.hessian(block=True)
    errors = []
    for eps in (0.0, 0.1, 0.5, 1.0):
        est = estimate_retain_hessian(inject_corruption(pset, eps, seed=9))
        errors.append(float(np.linalg.norm(est.matrix - h_true)))
    zero_at_origin = errors[0] <= 1e-6 * np.linalg.norm(h_true)
    monotone = all(b >= a - 1e-9 for a, b in zip(errors, errors[1:]))
    _report(capsys, "corruption-error-trend", zero_at_origin and monotone,
            "errors=" + "/".join(f"{e:.4f}" for e in errors)
            + " at eps=0/0.1/0.5/1.0 (non-decreasing, zero at origin)")


def test_parameter_distance_bound_holds(capsys):
    """The closed-form parameter-distance bound holds on 100 random logistic
    instances with unit-norm features, and the exact quadratic update leaves
    the retain gradient at solver tolerance."""
    consts = LOSS_CONSTANTS["logistic"]
    holds = 0
    for trial in range(100):
        rng = np.random.default_rng(1000 + trial)
        n = int(rng.integers(80, 201))
        d = int(rng.integers(3, 8))
        k = int(rng.integers(2, 5))
        lam = float(rng.uniform(0.05, 0.5))
        ds = data.make_synthetic_classification(n + 30, d, k,
                                                seed=1000 + trial)
        split = data.make_split(np.arange(n), np.arange(n, n + 30), 0.1,
                                1000 + trial)
        result = unlearn_pipeline(ds, split, lam, kind="logistic", block=False)
        report = theorem1_check(
            result.model_uf, result.retain_loss, gamma=consts["gamma"],
            grad_bound=consts["grad_bound"], lam=lam, n=len(split.train_idx),
            n_f=split.n_forget, eps=0.0, d=ds.dim * ds.num_classes)
        holds += int(report.holds)

    ds = data.make_synthetic_classification(240, 8, 3, seed=3)
    split = data.make_split(np.arange(200), np.arange(200, 240), 0.1, 3)
    quad = unlearn_pipeline(ds, split, 0.1)
    quad_report = theorem1_check(
        quad.model_uf, quad.retain_loss, gamma=0.0, grad_bound=np.inf,
        lam=0.1, n=200, n_f=split.n_forget, eps=0.0, d=ds.dim)

    ok = holds == 100 and quad_report.residual <= 1e-8
    _report(capsys, "parameter-distance-bound", ok,
            f"logistic holds {holds}/100 trials; quadratic residual="
            f"{quad_report.residual:.3e} (tol 1e-8)")


TREND_SEEDS = tuple(range(10, 40))


def _trend_gap(ds, frac, lam, kind, m, scale, tau, seed):
    """Retrained-vs-unlearned gap for one split seed: mean absolute accuracy
    difference over the test/remaining/forget columns, plus the relative
    parameter distance."""
    split = data.make_split(np.arange(300), np.arange(300, 600), frac, seed)
    block = None if kind == "quadratic" else False
    result = unlearn_pipeline(
        ds, split, lam, kind=kind,
        cfg=UnlearnConfig(hessian_source="estimated", tau=tau),
        est=EstimatorSettings(m=m, scale=scale, seed=seed + 100),
        block=block)
    retrained = retrain_oracle(ds, split, lam, kind=kind)
    gaps = [abs(accuracy(result.model_uf.w, ds, idx)
                - accuracy(retrained.w, ds, idx))
            for idx in (split.test_idx, split.retain_idx, split.forget_idx)]
    return float(np.mean(gaps)), _rel_dist(result.model_uf.w, retrained.w)


def _mean_trend(ds, settings, kind, lam_per=None, m_per=None, frac_per=None,
                scale=None, tau=0.0):
    acc_means, dist_means = [], []
    for value in settings:
        frac = frac_per(value) if frac_per else 0.10
        lam = lam_per(value) if lam_per else 0.01
        m = m_per(value) if m_per else 500
        rows = [_trend_gap(ds, frac, lam, kind, m, scale, tau, seed)
                for seed in TREND_SEEDS]
        acc_means.append(float(np.mean([r[0] for r in rows])))
        dist_means.append(float(np.mean([r[1] for r in rows])))
    return acc_means, dist_means


def test_ablation_trends(capsys):
    """Retrained-vs-unlearned gaps, averaged over 30 fixed split seeds,
    shrink monotonically along each ablation axis: forget fraction
    15% -> 10% -> 5%, probe count m 250 -> 500 -> 1000, and regularization
    0 -> 5e-4 -> 1e-3. Runs in under five minutes."""
    start = time.time()
    ds = data.make_synthetic_classification(600, 6, 3, seed=5, class_sep=1.0,
                                            noise=1.2)

    frac_acc, frac_dist = _mean_trend(
        ds, (0.15, 0.10, 0.05), "logistic", frac_per=lambda v: v, scale=4.0)
    m_acc, m_dist = _mean_trend(
        ds, (250, 500, 1000), "logistic", m_per=lambda v: v, scale=4.0,
        tau=1.0)
    small = data.FeatureDataset(features=0.05 * ds.features, labels=ds.labels,
                                num_classes=ds.num_classes)
    lam_acc, lam_dist = _mean_trend(
        small, (0.0, 0.0005, 0.001), "quadratic", lam_per=lambda v: v)

    elapsed = time.time() - start
    decreasing = lambda xs: xs[0] > xs[1] > xs[2]
    ok = (all(decreasing(xs) for xs in
              (frac_acc, frac_dist, m_acc, m_dist, lam_acc, lam_dist))
          and elapsed < 300.0)
    fmt = lambda xs: "/".join(f"{x:.3f}" for x in xs)
    _report(capsys, "ablation-trends", ok,
            f"fraction gap {fmt(frac_acc)}, m gap {fmt(m_acc)}, "
            f"lambda gap {fmt(lam_acc)} (all decreasing), "
            f"elapsed {elapsed:.0f}s (< 300s)")


def test_membership_inference_near_chance_on_retrained_models(capsys):
    """The loss-threshold membership attack scores a retrained model at
    chance level: mean score over 10 seeds within 50 +/- 5."""
    scores = []
    for seed in range(10):
        ds = data.make_synthetic_classification(900, 6, 3, seed=seed)
        split = data.make_split(np.arange(600), np.arange(600, 900), 0.1, seed)
        model = retrain_oracle(ds, split, 0.05)
        scores.append(mia_score(model, ds, split.forget_idx, split.test_idx,
                                seed=seed))
    mean = float(np.mean(scores))
    _report(capsys, "mia-chance-level", 45.0 <= mean <= 55.0,
            f"mean_score={mean:.2f} over 10 seeds (target 50 +/- 5)")
