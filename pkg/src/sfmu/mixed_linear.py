"""Linearized-network adapter: reduce the Jacobian-feature quadratic
problem to the linear machinery and reuse trainer/estimator/unlearner.

The linearized objective over correction weights w is

    sum_i ||f(x_i) + J_i w - y_i||^2 + (lam * n / 2) * ||w||^2

with per-sample Jacobians J_i. For a linearized head the Jacobian row of
class c is the shared feature vector a_i, so the data term decouples into
class blocks over features a_i and residual targets t_i = y_i - f(x_i).
That makes the objective exactly twice the quadratic SubsetLoss over
(a_i, t_i) with regularization lam / 2, so every downstream operation
(training, Hessian estimation, the removal update) applies unchanged.

Residual targets travel in the "SFUJRES1" container: 8-byte magic,
u32 n, u32 d (Jacobian feature dimension, for cross-checking), u32 k,
then n*k little-endian float32 targets.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import FeatureDataset, SplitSpec, _read_exact, load_features
from .errors import BadMagic, DimensionMismatch
from .evaluation import EvalReport, evaluate_model, mia_score
from .losses import SubsetLoss
from .trainer import LinearModel, retrain_oracle, train
from .unlearner import EstimatorSettings, UnlearnConfig, unlearn_pipeline

RESIDUAL_MAGIC = b"SFUJRES1"


@dataclass(frozen=True)
class LinearizedProblem:
    jacobian_features: np.ndarray  # n x d
    residual_targets: np.ndarray  # n x k, y_i - f(x_i)
    labels: np.ndarray  # n true class indices
    lam: float

    def __post_init__(self):
        n = self.jacobian_features.shape[0]
        if self.residual_targets.shape[0] != n or self.labels.shape != (n,):
            raise DimensionMismatch("inconsistent sample counts")

    @property
    def n(self) -> int:
        return self.jacobian_features.shape[0]

    @property
    def num_classes(self) -> int:
        return self.residual_targets.shape[1]


def save_residuals(path: str | Path, targets: np.ndarray, jacobian_dim: int) -> None:
    targets = np.asarray(targets, dtype=np.float64)
    n, k = targets.shape
    with open(path, "wb") as fh:
        fh.write(RESIDUAL_MAGIC)
        fh.write(struct.pack("<III", n, jacobian_dim, k))
        fh.write(np.ascontiguousarray(targets, dtype="<f4").tobytes())


def load_residuals(path: str | Path) -> tuple[np.ndarray, int]:
    with open(path, "rb") as fh:
        magic = fh.read(len(RESIDUAL_MAGIC))
        if magic != RESIDUAL_MAGIC:
            raise BadMagic(f"{path}: expected {RESIDUAL_MAGIC!r}, got {magic!r}")
        n, d, k = struct.unpack("<III", _read_exact(fh, 12, "header"))
        targets = np.frombuffer(
            _read_exact(fh, n * k * 4, "targets"), dtype="<f4"
        ).reshape(n, k).astype(np.float64)
    return targets, d


def load_linearized(
    features_path: str | Path, residuals_path: str | Path, lam: float
) -> LinearizedProblem:
    """Pair a Jacobian-feature file with its residual-target file."""
    feats = load_features(features_path)
    targets, jac_dim = load_residuals(residuals_path)
    if targets.shape[0] != feats.n:
        raise DimensionMismatch(
            f"{residuals_path}: n={targets.shape[0]} vs features n={feats.n}"
        )
    if jac_dim != feats.dim:
        raise DimensionMismatch(
            f"{residuals_path}: d={jac_dim} vs features d={feats.dim}"
        )
    if targets.shape[1] != feats.num_classes:
        raise DimensionMismatch(
            f"{residuals_path}: k={targets.shape[1]} vs features k={feats.num_classes}"
        )
    return LinearizedProblem(
        jacobian_features=feats.features,
        residual_targets=targets,
        labels=feats.labels,
        lam=lam,
    )


def linearized_loss_value(problem: LinearizedProblem, w: np.ndarray, idx=None) -> float:
    """Direct evaluation of the linearized objective over idx (default all)."""
    if idx is None:
        idx = np.arange(problem.n)
    idx = np.asarray(idx, dtype=np.int64)
    W = np.asarray(w, dtype=np.float64).reshape(problem.num_classes, -1)
    resid = problem.jacobian_features[idx] @ W.T - problem.residual_targets[idx]
    data = float(np.sum(resid**2))
    reg = 0.5 * problem.lam * len(idx) * float(np.dot(w, w))
    return data + reg


def as_dataset(problem: LinearizedProblem) -> FeatureDataset:
    """Quadratic-loss dataset whose subset loss is half the linearized
    objective at regularization lam / 2."""
    return FeatureDataset(
        features=problem.jacobian_features,
        labels=problem.labels,
        num_classes=problem.num_classes,
        targets=problem.residual_targets,
    )


def equivalent_lam(problem: LinearizedProblem) -> float:
    return problem.lam / 2.0


def mixed_accuracy(problem: LinearizedProblem, w: np.ndarray, idx: np.ndarray) -> float:
    """Accuracy of the linearized network f(x) + J w on the index set."""
    idx = np.asarray(idx, dtype=np.int64)
    W = np.asarray(w, dtype=np.float64).reshape(problem.num_classes, -1)
    one_hot = np.zeros((idx.size, problem.num_classes))
    one_hot[np.arange(idx.size), problem.labels[idx]] = 1.0
    base = one_hot - problem.residual_targets[idx]
    scores = base + problem.jacobian_features[idx] @ W.T
    return 100.0 * float(np.mean(np.argmax(scores, axis=1) == problem.labels[idx]))


def run_mixed_linear(
    problem: LinearizedProblem,
    split: SplitSpec,
    cfg: UnlearnConfig = UnlearnConfig(hessian_source="estimated"),
    est: EstimatorSettings = EstimatorSettings(),
    mia_seed: int = 0,
) -> list[EvalReport]:
    """Retrain-oracle and removal-update rows over the linearized problem."""
    ds = as_dataset(problem)
    lam = equivalent_lam(problem)
    retrained = retrain_oracle(ds, split, lam)
    result = unlearn_pipeline(ds, split, lam, kind="quadratic", cfg=cfg, est=est)

    rows = []
    for method, model, ref in (
        ("retrained", retrained, None),
        (f"unlearned({'-' if cfg.hessian_source == 'estimated' else '+'})",
         result.model_uf, retrained),
    ):
        row = EvalReport(
            method=method,
            setting=f"forget={split.n_forget}",
            test_acc=mixed_accuracy(problem, model.w, split.test_idx),
            remain_acc=mixed_accuracy(problem, model.w, split.retain_idx),
            forget_acc=mixed_accuracy(problem, model.w, split.forget_idx),
            mia_score=mia_score(model, ds, split.forget_idx, split.test_idx,
                                seed=mia_seed),
        )
        if ref is not None:
            row.param_dist = float(np.linalg.norm(model.w - ref.w))
            row.grad_residual = float(
                np.linalg.norm(result.retain_loss.gradient(model.w))
            )
        rows.append(row)
    return rows
