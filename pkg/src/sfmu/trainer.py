"""Training: closed-form ridge for the quadratic loss, damped Newton for
logistic, plus the retrain-from-scratch oracle on the retain set."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import FeatureDataset, SplitSpec
from .errors import NotConverged, NotPositiveDefinite, SingularSystem
from .linalg import solve_spd
from .losses import SubsetLoss

DEFAULT_TOL = {"quadratic": 1e-8, "logistic": 1e-6}


@dataclass
class LinearModel:
    """Flattened parameter vector with its loss binding and fit metadata."""

    w: np.ndarray
    kind: str
    lam: float
    metadata: dict = field(default_factory=dict)


def train(loss: SubsetLoss, tol: float | None = None, max_iter: int = 100) -> LinearModel:
    """Minimize the subset loss to gradient norm <= tol.

    Quadratic losses are solved in closed form (one SPD solve per class
    block); logistic losses by damped Newton from w = 0 with backtracking
    halving of the step until the loss decreases.
    """
    if tol is None:
        tol = DEFAULT_TOL[loss.kind]
    if loss.kind == "quadratic":
        return _train_quadratic(loss, tol)
    return _train_newton(loss, tol, max_iter)


def _train_quadratic(loss: SubsetLoss, tol: float) -> LinearModel:
    blk = loss.hessian(block=True)
    rhs = loss._X.T @ loss._T  # d x k
    try:
        sol = solve_spd(blk, rhs)
    except NotPositiveDefinite as exc:
        raise SingularSystem(
            "quadratic system is singular; need lam*|S| > 0 or full-rank features"
        ) from exc
    w = sol.T.ravel()
    grad_norm = float(np.linalg.norm(loss.gradient(w)))
    return LinearModel(
        w=w,
        kind=loss.kind,
        lam=loss.lam,
        metadata={"iterations": 0, "grad_norm": grad_norm, "tol": tol,
                  "solver": "closed_form"},
    )


def _train_newton(loss: SubsetLoss, tol: float, max_iter: int) -> LinearModel:
    w = np.zeros(loss.num_params)
    value = loss.value(w)
    for iteration in range(1, max_iter + 1):
        grad = loss.gradient(w)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= tol:
            return LinearModel(
                w=w,
                kind=loss.kind,
                lam=loss.lam,
                metadata={"iterations": iteration - 1, "grad_norm": grad_norm,
                          "tol": tol, "solver": "newton"},
            )
        hess = loss.hessian(w)
        try:
            step = solve_spd(hess, grad)
        except NotPositiveDefinite as exc:
            raise SingularSystem("Newton system is not positive definite") from exc
        t = 1.0
        for _ in range(60):
            candidate = w - t * step
            candidate_value = loss.value(candidate)
            if candidate_value < value:
                break
            t *= 0.5
        else:
            # The Newton decrement can drop below the floating-point
            # resolution of the loss before the absolute gradient
            # tolerance is met; such a point is numerically stationary.
            if 0.5 * float(grad @ step) <= 64.0 * np.finfo(float).eps * abs(value):
                return LinearModel(
                    w=w, kind=loss.kind, lam=loss.lam,
                    metadata={"iterations": iteration, "grad_norm": grad_norm,
                              "tol": tol, "solver": "newton"},
                )
            raise NotConverged("backtracking failed to decrease the loss")
        w, value = candidate, candidate_value
    grad_norm = float(np.linalg.norm(loss.gradient(w)))
    if grad_norm <= tol:
        return LinearModel(
            w=w, kind=loss.kind, lam=loss.lam,
            metadata={"iterations": max_iter, "grad_norm": grad_norm,
                      "tol": tol, "solver": "newton"},
        )
    raise NotConverged(
        f"gradient norm {grad_norm:.3e} > tol {tol:.1e} after {max_iter} iterations"
    )


def retrain_oracle(
    ds: FeatureDataset,
    split: SplitSpec,
    lam: float,
    kind: str = "quadratic",
    tol: float | None = None,
    max_iter: int = 100,
) -> LinearModel:
    """Retrain from scratch on the retain set (the reference model)."""
    retain_loss = SubsetLoss(ds, split.retain_idx, lam, kind)
    model = train(retain_loss, tol=tol, max_iter=max_iter)
    model.metadata["oracle"] = True
    return model
