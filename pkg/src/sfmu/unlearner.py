"""Newton-step removal update with exact or estimated retain Hessian."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import FeatureDataset, SplitSpec
from .errors import DimensionMismatch
from .estimator import (
    HessianEstimate,
    estimate_retain_hessian,
    make_perturbation_set,
)
from .linalg import solve_spd
from .losses import SubsetLoss
from .trainer import LinearModel, train

NOISE_CONVENTIONS = ("variance", "stddev")


@dataclass(frozen=True)
class UnlearnConfig:
    """Removal-update knobs.

    noise_convention selects how sigma enters the additive Gaussian term:
    'variance' applies sigma^2 * xi (the literal published form), 'stddev'
    applies sigma * xi. tau is a ridge floor added to the Hessian before
    inversion; the estimated Hessian is PSD but can be singular for small
    probe counts.
    """

    hessian_source: str = "exact"
    sigma: float = 0.0
    noise_seed: int = 0
    tau: float = 0.0
    noise_convention: str = "variance"

    def __post_init__(self):
        if self.hessian_source not in ("exact", "estimated"):
            raise ValueError(f"unknown hessian_source {self.hessian_source!r}")
        if self.sigma < 0 or self.tau < 0:
            raise ValueError("sigma and tau must be non-negative")
        if self.noise_convention not in NOISE_CONVENTIONS:
            raise ValueError(f"unknown noise_convention {self.noise_convention!r}")


@dataclass(frozen=True)
class EstimatorSettings:
    m: int = 500
    scale: float | None = None
    seed: int = 0


def _newton_step(h_r: np.ndarray, grad_f: np.ndarray, tau: float) -> np.ndarray:
    """Solve (H + tau I) s = grad_f, applying a block Hessian per class."""
    side = h_r.shape[0]
    h = h_r + tau * np.eye(side) if tau > 0 else h_r
    if grad_f.size == side:
        return solve_spd(h, grad_f)
    if grad_f.size % side == 0:
        blocks = grad_f.reshape(-1, side)
        return solve_spd(h, blocks.T).T.ravel()
    raise DimensionMismatch(
        f"gradient of size {grad_f.size} against a {side}x{side} Hessian"
    )


def unlearn(
    model: LinearModel,
    h_r: np.ndarray,
    grad_f: np.ndarray,
    cfg: UnlearnConfig = UnlearnConfig(),
) -> LinearModel:
    """Removal update w* + (H_r + tau I)^-1 grad_f plus optional noise.

    h_r may be the full p x p retain Hessian or the shared d x d class
    block of a quadratic loss, in which case the solve is applied per
    class block of grad_f.
    """
    grad_f = np.asarray(grad_f, dtype=np.float64).ravel()
    if grad_f.size != model.w.size:
        raise DimensionMismatch("forget gradient does not match the model")
    step = _newton_step(np.asarray(h_r, dtype=np.float64), grad_f, cfg.tau)
    w_uf = model.w + step
    if cfg.sigma > 0:
        xi = np.random.default_rng(cfg.noise_seed).standard_normal(w_uf.size)
        coef = cfg.sigma**2 if cfg.noise_convention == "variance" else cfg.sigma
        w_uf = w_uf + coef * xi
    return LinearModel(
        w=w_uf,
        kind=model.kind,
        lam=model.lam,
        metadata={
            "hessian_source": cfg.hessian_source,
            "newton_step": step,
            "sigma": cfg.sigma,
            "tau": cfg.tau,
            "noise_convention": cfg.noise_convention,
            "noise_seed": cfg.noise_seed,
        },
    )


@dataclass
class PipelineResult:
    model: LinearModel
    model_uf: LinearModel
    forget_loss: SubsetLoss
    retain_loss: SubsetLoss
    estimate: HessianEstimate | None = None
    extras: dict = field(default_factory=dict)


def unlearn_pipeline(
    ds: FeatureDataset,
    split: SplitSpec,
    lam: float,
    kind: str = "quadratic",
    cfg: UnlearnConfig = UnlearnConfig(),
    est: EstimatorSettings = EstimatorSettings(),
    block: bool | None = None,
    model: LinearModel | None = None,
) -> PipelineResult:
    """Train (or reuse) the full model, obtain the retain Hessian by the
    configured source, and apply the removal update."""
    if block is None:
        block = kind == "quadratic"
    train_loss = SubsetLoss(ds, split.train_idx, lam, kind)
    forget_loss = SubsetLoss(ds, split.forget_idx, lam, kind)
    retain_loss = SubsetLoss(ds, split.retain_idx, lam, kind)
    if model is None:
        model = train(train_loss)

    estimate = None
    if cfg.hessian_source == "exact":
        h_r = retain_loss.hessian(model.w, block=block)
    else:
        pset = make_perturbation_set(
            forget_loss,
            model.w,
            m=est.m,
            scale=est.scale,
            seed=est.seed,
            block=block,
            n_retain=retain_loss.n_samples,
        )
        estimate = estimate_retain_hessian(pset)
        h_r = estimate.matrix

    grad_f = forget_loss.gradient(model.w)
    model_uf = unlearn(model, h_r, grad_f, cfg)
    return PipelineResult(
        model=model,
        model_uf=model_uf,
        forget_loss=forget_loss,
        retain_loss=retain_loss,
        estimate=estimate,
        extras={"block": block},
    )
