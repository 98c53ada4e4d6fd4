"""Retain-Hessian estimation from forget-set perturbation probes.

The unknown symmetric matrix H is fitted by least squares to the
second-order identity

    0.5 * z^T H z - g_f^T z - dL(z) ~ 0

over m Gaussian probes z, where g_f is the forget gradient at the trained
optimum and dL(z) is a recorded loss difference. When dL comes from the
forget set alone, it is population-matched by the factor
n_retain / n_forget before fitting: forget and retain samples are drawn
from the same distribution, so the *mean* forget loss difference tracks
the mean retain loss difference, and the sum-form retain Hessian is
n_retain times the mean. The fit is solved unconstrained, projected onto
the PSD cone, and optionally polished by projected gradient descent.

Also included: the Gaussian quartic trace identity, the closed-form
optimal bias matrix -(2*eps/(2+d)) * I, and the eps-driven error bound
2*eps*sqrt(d)/(2+d), all used as verification operations.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse.linalg

from .errors import DimensionMismatch, NotConverged, RankDeficientProbes
from .linalg import project_psd, smallest_eigenvalue, symmetrize
from .losses import SubsetLoss

__all__ = [
    "PerturbationSet",
    "HessianEstimate",
    "sample_probes",
    "make_perturbation_set",
    "inject_corruption",
    "surrogate_residual",
    "surrogate_objective",
    "estimate_retain_hessian",
    "verify_quartic_identity",
    "verify_optimal_M",
    "lemma1_bound",
    "default_probe_scale",
]


@dataclass(frozen=True)
class PerturbationSet:
    """Probes around w* with recorded loss differences and forget gradient.

    loss_diffs already carry the population-matching transform recorded
    in `rescale`: the quadratic part of each forget difference is scaled
    by that factor and the linear part is flipped to the retain side
    (rescale stays 1.0 when an oracle retain difference was recorded).
    """

    probes: np.ndarray  # m x q
    loss_diffs: np.ndarray  # m
    grad: np.ndarray  # q, forget gradient (restricted to a block if q < p)
    scale: float
    seed: int
    rescale: float = 1.0

    @property
    def m(self) -> int:
        return self.probes.shape[0]

    @property
    def dim(self) -> int:
        return self.probes.shape[1]


@dataclass(frozen=True)
class HessianEstimate:
    """PSD estimate of the retain Hessian plus solver provenance."""

    matrix: np.ndarray
    residual: float  # achieved surrogate objective
    m: int
    scale: float
    seed: int
    rescale: float = 1.0
    report: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def sample_probes(dim: int, m: int, scale: float, seed: int) -> np.ndarray:
    """m i.i.d. probes, each coordinate scale * N(0, 1), deterministic per seed."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if scale <= 0:
        raise ValueError("scale must be positive")
    rng = np.random.default_rng(seed)
    return scale * rng.standard_normal((m, dim))


def default_probe_scale(kind: str, w_star: np.ndarray) -> float:
    """Unit scale for the (Taylor-exact) quadratic loss; small for logistic."""
    if kind == "quadratic":
        return 1.0
    return max(0.01 * float(np.linalg.norm(w_star)), 1e-3)


def make_perturbation_set(
    forget_loss: SubsetLoss,
    w_star: np.ndarray,
    m: int,
    scale: float | None = None,
    seed: int = 0,
    block: bool = False,
    n_retain: int | None = None,
    oracle_loss: SubsetLoss | None = None,
) -> PerturbationSet:
    """Sample probes and record loss differences around w*.

    block=True probes only the first class block (valid for the quadratic
    loss, whose Hessian blocks are identical). n_retain enables the
    population-matching rescale of forget-only loss differences; it is
    ignored when oracle_loss supplies retain-side differences directly.
    """
    w_star = np.asarray(w_star, dtype=np.float64).ravel()
    if w_star.size != forget_loss.num_params:
        raise DimensionMismatch("w_star does not match the loss dimension")
    if scale is None:
        scale = default_probe_scale(forget_loss.kind, w_star)
    dim = forget_loss.dim if block else forget_loss.num_params
    probes = sample_probes(dim, m, scale, seed)

    diff_loss = oracle_loss if oracle_loss is not None else forget_loss
    base = diff_loss.value(w_star)
    diffs = np.empty(m)
    shifted = w_star.copy()
    for i in range(m):
        shifted[:] = w_star
        shifted[:dim] += probes[i]
        diffs[i] = diff_loss.value(shifted) - base

    grad = forget_loss.gradient(w_star)[:dim]
    if oracle_loss is not None:
        rescale = 1.0
    elif n_retain is not None:
        # Population-match the quadratic part only. The linear part of a
        # forget difference is +g_f^T z, known exactly, while the retain
        # difference carries -g_f^T z (the full gradient vanishes at w*).
        # Rescaling it along with the quadratic part would leave a
        # (rescale + 1) * g_f^T z contamination in the fit target.
        rescale = n_retain / forget_loss.n_samples
        linear = probes @ grad
        diffs = rescale * (diffs - linear) - linear
    else:
        rescale = 1.0

    return PerturbationSet(
        probes=probes,
        loss_diffs=diffs,
        grad=grad,
        scale=scale,
        seed=seed,
        rescale=rescale,
    )


def inject_corruption(pset: PerturbationSet, eps: float, seed: int = 0) -> PerturbationSet:
    """Add a uniform perturbation bounded by eps to each loss difference."""
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-eps, eps, size=pset.m)
    return PerturbationSet(
        probes=pset.probes,
        loss_diffs=pset.loss_diffs + noise,
        grad=pset.grad,
        scale=pset.scale,
        seed=pset.seed,
        rescale=pset.rescale,
    )


def surrogate_residual(h: np.ndarray, pset: PerturbationSet, i: int) -> float:
    """Residual of probe i: 0.5 z^T H z - g^T z - dL_i."""
    h = np.asarray(h, dtype=np.float64)
    z = pset.probes[i]
    if h.shape != (z.size, z.size):
        raise DimensionMismatch(
            f"H of shape {h.shape} against probes of dimension {z.size}"
        )
    return float(0.5 * z @ h @ z - pset.grad @ z - pset.loss_diffs[i])


def surrogate_objective(h: np.ndarray, pset: PerturbationSet) -> float:
    """Mean squared probe residual (the estimation objective)."""
    h = np.asarray(h, dtype=np.float64)
    z = pset.probes
    if h.shape != (z.shape[1], z.shape[1]):
        raise DimensionMismatch(
            f"H of shape {h.shape} against probes of dimension {z.shape[1]}"
        )
    quad = 0.5 * np.einsum("ij,jk,ik->i", z, h, z)
    res = quad - z @ pset.grad - pset.loss_diffs
    return float(np.mean(res**2))


def _triangle_indices(q: int):
    iu0, iu1 = np.triu_indices(q)
    coeff = np.where(iu0 == iu1, 0.5, 1.0)
    return iu0, iu1, coeff


def _design_matrix(probes: np.ndarray):
    """Rows map vec(H) (upper triangle) to 0.5 * z^T H z."""
    q = probes.shape[1]
    iu0, iu1, coeff = _triangle_indices(q)
    return probes[:, iu0] * probes[:, iu1] * coeff, (iu0, iu1)


def _unvec(h_vec: np.ndarray, q: int, iu) -> np.ndarray:
    h = np.zeros((q, q))
    h[iu] = h_vec
    h[(iu[1], iu[0])] = h_vec
    return h


def _solve_normal_cg(design: np.ndarray, target: np.ndarray) -> np.ndarray:
    gram_mv = lambda v: design.T @ (design @ v)
    op = scipy.sparse.linalg.LinearOperator(
        (design.shape[1], design.shape[1]), matvec=gram_mv
    )
    rhs = design.T @ target
    sol, info = scipy.sparse.linalg.cg(op, rhs, rtol=1e-12, maxiter=20000)
    if info != 0:
        raise NotConverged(f"conjugate gradient on the normal system: info={info}")
    return sol


def estimate_retain_hessian(
    pset: PerturbationSet,
    polish: bool = True,
    polish_tol: float = 1e-10,
    polish_patience: int = 10,
    max_polish_iter: int = 1000,
    cg_threshold: int = 100,
) -> HessianEstimate:
    """Fit the PSD matrix minimizing the surrogate objective.

    Procedure: unconstrained linear least squares over the d(d+1)/2 free
    entries (SVD-based for small dimensions, conjugate gradient on the
    normal system beyond cg_threshold), PSD projection, then projected
    gradient descent from the projection until the objective stagnates
    (relative decrease < polish_tol over polish_patience steps).
    """
    q = pset.dim
    n_unknown = q * (q + 1) // 2
    if pset.m < n_unknown:
        warnings.warn(
            f"m={pset.m} probes for {n_unknown} symmetric unknowns; "
            "the estimate is rank-limited",
            RankDeficientProbes,
        )
    design, iu = _design_matrix(pset.probes)
    target = pset.loss_diffs + pset.probes @ pset.grad

    if q > cg_threshold:
        h_vec = _solve_normal_cg(design, target)
    else:
        h_vec, *_ = np.linalg.lstsq(design, target, rcond=None)
    h = project_psd(_unvec(h_vec, q, iu))

    objective = lambda hv: float(np.mean((design @ hv - target) ** 2))
    h_vec_proj = h[iu]
    best = objective(h_vec_proj)
    polished = False
    if polish and best > 0.0:
        h, best = _polish_pgd(
            design, target, h, iu, best,
            tol=polish_tol, patience=polish_patience, max_iter=max_polish_iter,
        )
        polished = True

    return HessianEstimate(
        matrix=h,
        residual=best,
        m=pset.m,
        scale=pset.scale,
        seed=pset.seed,
        rescale=pset.rescale,
        report={
            "n_unknown": n_unknown,
            "polished": polished,
            "min_eigenvalue": smallest_eigenvalue(h),
        },
    )


def _polish_pgd(design, target, h, iu, best, tol, patience, max_iter):
    """Projected gradient descent on the vectorized objective."""
    m = design.shape[0]
    q = h.shape[0]
    # Lipschitz constant of the gradient via power iteration on A^T A.
    v = np.ones(design.shape[1]) / math.sqrt(design.shape[1])
    sigma_sq = 1.0
    for _ in range(60):
        v = design.T @ (design @ v)
        sigma_sq = np.linalg.norm(v)
        if sigma_sq == 0.0:
            return h, best
        v /= sigma_sq
    step = m / (2.0 * sigma_sq)

    h_vec = h[iu]
    stagnant = 0
    for _ in range(max_iter):
        grad = (2.0 / m) * (design.T @ (design @ h_vec - target))
        candidate = project_psd(_unvec(h_vec - step * grad, q, iu))
        cand_vec = candidate[iu]
        value = float(np.mean((design @ cand_vec - target) ** 2))
        if best - value < tol * max(best, 1e-300):
            stagnant += 1
        else:
            stagnant = 0
        if value < best:
            h, h_vec, best = candidate, cand_vec, value
        if stagnant >= patience:
            break
    return h, best


# ---------------------------------------------------------------------------
# Verification operations for the population-objective analysis


class QuarticCheck(NamedTuple):
    monte_carlo: float
    closed_form: float
    std_error: float


def verify_quartic_identity(
    m_matrix: np.ndarray, samples: int = 1_000_000, seed: int = 0
) -> QuarticCheck:
    """Monte-Carlo check of E[(0.5 z^T M z)^2] = 0.5 tr(M^2) + 0.25 tr(M)^2."""
    m_matrix = symmetrize(m_matrix)
    d = m_matrix.shape[0]
    closed = 0.5 * float(np.trace(m_matrix @ m_matrix)) + 0.25 * float(
        np.trace(m_matrix)
    ) ** 2
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    remaining = samples
    while remaining > 0:
        chunk = min(remaining, 200_000)
        z = rng.standard_normal((chunk, d))
        vals = (0.5 * np.einsum("ij,jk,ik->i", z, m_matrix, z)) ** 2
        total += float(vals.sum())
        total_sq += float((vals**2).sum())
        remaining -= chunk
    mean = total / samples
    var = max(total_sq / samples - mean**2, 0.0)
    return QuarticCheck(mean, closed, math.sqrt(var / samples))


def verify_optimal_M(
    eps: float, d: int, tol: float = 1e-9, max_iter: int = 10_000
) -> np.ndarray:
    """Minimize 0.5 tr(M^2 + 2 eps M) + 0.25 tr(M)^2 by gradient descent.

    The minimizer is -(2 eps / (2 + d)) * I; the numerical descent from
    M = 0 is kept as an independent check of that formula.
    """
    if eps < 0 or d < 1:
        raise ValueError("eps must be >= 0 and d >= 1")
    m = np.zeros((d, d))
    eye = np.eye(d)
    step = 2.0 / (2.0 + d)  # inverse of the largest curvature 1 + d/2
    for _ in range(max_iter):
        grad = m + eps * eye + 0.5 * np.trace(m) * eye
        if np.max(np.abs(grad)) <= tol * max(1.0, eps):
            return m
        m = m - step * grad
    raise NotConverged("gradient descent on the trace objective did not converge")


def lemma1_bound(eps: float, d: int) -> float:
    """Error-bound value 2 * eps * sqrt(d) / (2 + d)."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    return 2.0 * eps * math.sqrt(d) / (2.0 + d)
