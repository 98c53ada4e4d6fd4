"""Source-free fine-tuning baselines: NegGrad and Random Labels."""

from __future__ import annotations

from dataclasses import dataclass, replace as dc_replace

import numpy as np

from .data import FeatureDataset
from .errors import DivergenceDetected
from .losses import SubsetLoss
from .trainer import LinearModel

BASELINE_KINDS = ("neggrad", "random_labels")


@dataclass(frozen=True)
class BaselineConfig:
    kind: str
    steps: int = 50
    step_size: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise ValueError(f"unknown baseline kind {self.kind!r}")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.step_size < 0:
            raise ValueError("step_size must be non-negative")


def resample_labels(labels: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Uniform wrong-class relabeling; never reproduces the original label."""
    rng = np.random.default_rng(seed)
    offsets = rng.integers(1, k, size=labels.size)
    return (labels + offsets) % k


def run_baseline(
    model: LinearModel,
    ds: FeatureDataset,
    forget_idx: np.ndarray,
    lam: float,
    cfg: BaselineConfig,
) -> LinearModel:
    """Fine-tune on the forget set only.

    neggrad ascends the forget loss (w += step_size * grad); random_labels
    relabels each forget sample to a uniformly random wrong class and
    descends the relabeled loss. Raises DivergenceDetected when the
    working loss exceeds 1e6 times its initial value.
    """
    forget_idx = np.asarray(forget_idx, dtype=np.int64)
    if cfg.kind == "random_labels":
        new_labels = ds.labels.copy()
        new_labels[forget_idx] = resample_labels(
            ds.labels[forget_idx], ds.num_classes, cfg.seed
        )
        work_ds = dc_replace(ds, labels=new_labels, targets=None)
        direction = -1.0
    else:
        work_ds = ds
        direction = 1.0

    loss = SubsetLoss(work_ds, forget_idx, lam, model.kind)
    w = model.w.copy()
    initial = abs(loss.value(w)) + 1e-12
    for step in range(cfg.steps):
        w = w + direction * cfg.step_size * loss.gradient(w)
        if abs(loss.value(w)) > 1e6 * initial:
            raise DivergenceDetected(
                f"{cfg.kind} loss exploded at step {step + 1}"
            )
    return LinearModel(
        w=w,
        kind=model.kind,
        lam=model.lam,
        metadata={"baseline": cfg.kind, "steps": cfg.steps,
                  "step_size": cfg.step_size, "seed": cfg.seed},
    )
