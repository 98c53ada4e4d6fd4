"""Per-sample convex losses and regularized subset losses.

Parameters are flattened class-major: w = [w_class0 | w_class1 | ...],
p = d*k, so W = w.reshape(k, d) and class scores are X @ W.T.

Conventions:
  quadratic  l_i = 0.5 * ||t_i - W x_i||^2 with one-hot (or real) targets,
             so each class block contributes exactly x x^T to the Hessian.
  logistic   multinomial cross-entropy.

The subset loss is L_S(w) = sum_{i in S} l_i + (lam*|S|/2) * ||w||^2, which
makes Hessians and gradients additive across a forget/retain partition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, softmax

from .data import FeatureDataset
from .errors import DimensionMismatch
from .linalg import symmetrize

LOSS_KINDS = ("quadratic", "logistic")

# Conservative constants for bound reporting: gamma is the Lipschitz
# constant of the scalar loss's second derivative, C bounds the per-sample
# gradient norm under ||x|| <= 1. The quadratic loss has a constant second
# derivative (gamma = 0); its gradient is unbounded in w, recorded as inf.
LOSS_CONSTANTS = {
    "quadratic": {"gamma": 0.0, "grad_bound": math.inf},
    "logistic": {"gamma": 1.0, "grad_bound": math.sqrt(2.0)},
}


@dataclass(frozen=True)
class SubsetLoss:
    """Regularized empirical loss over an index subset of a dataset."""

    dataset: FeatureDataset
    idx: np.ndarray
    lam: float
    kind: str = "quadratic"

    _X: np.ndarray = field(init=False, repr=False)
    _T: np.ndarray = field(init=False, repr=False)
    _y: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        idx = np.asarray(self.idx, dtype=np.int64)
        object.__setattr__(self, "idx", idx)
        object.__setattr__(self, "_X", self.dataset.features[idx])
        object.__setattr__(self, "_y", self.dataset.labels[idx])
        object.__setattr__(self, "_T", self.dataset.one_hot_targets()[idx])

    @property
    def n_samples(self) -> int:
        return len(self.idx)

    @property
    def dim(self) -> int:
        return self.dataset.dim

    @property
    def num_classes(self) -> int:
        return self.dataset.num_classes

    @property
    def num_params(self) -> int:
        return self.dim * self.num_classes

    @property
    def gamma(self) -> float:
        return LOSS_CONSTANTS[self.kind]["gamma"]

    @property
    def grad_bound(self) -> float:
        return LOSS_CONSTANTS[self.kind]["grad_bound"]

    @property
    def reg_strength(self) -> float:
        """Coefficient of I in the Hessian: lam * |S|."""
        return self.lam * self.n_samples

    def _weights(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=np.float64).ravel()
        if w.size != self.num_params:
            raise DimensionMismatch(
                f"expected {self.num_params} parameters, got {w.size}"
            )
        return w.reshape(self.num_classes, self.dim)

    def value(self, w: np.ndarray) -> float:
        W = self._weights(w)
        reg = 0.5 * self.reg_strength * float(W.ravel() @ W.ravel())
        return float(np.sum(self.sample_losses(w))) + reg

    def sample_losses(self, w: np.ndarray) -> np.ndarray:
        """Per-sample data-term losses (no regularization share)."""
        W = self._weights(w)
        scores = self._X @ W.T
        if self.kind == "quadratic":
            return 0.5 * np.sum((scores - self._T) ** 2, axis=1)
        lse = logsumexp(scores, axis=1)
        return lse - scores[np.arange(len(self.idx)), self._y]

    def gradient(self, w: np.ndarray) -> np.ndarray:
        W = self._weights(w)
        scores = self._X @ W.T
        if self.kind == "quadratic":
            resid = scores - self._T
        else:
            resid = softmax(scores, axis=1)
            resid[np.arange(len(self.idx)), self._y] -= 1.0
        grad = resid.T @ self._X + self.reg_strength * W
        return grad.ravel()

    def hessian(self, w: np.ndarray | None = None, block: bool = False) -> np.ndarray:
        """Hessian at w; block=True returns the shared d x d quadratic block.

        The quadratic-loss Hessian is w-independent and block-diagonal with
        k identical d x d blocks, so block mode keeps estimator experiments
        at feature-dimension scale.
        """
        if self.kind == "quadratic":
            blk = self._X.T @ self._X + self.reg_strength * np.eye(self.dim)
            blk = symmetrize(blk)
            if block:
                return blk
            full = np.zeros((self.num_params, self.num_params))
            for c in range(self.num_classes):
                full[c * self.dim:(c + 1) * self.dim, c * self.dim:(c + 1) * self.dim] = blk
            return full
        if block:
            raise ValueError("block Hessian is only defined for the quadratic loss")
        if w is None:
            raise DimensionMismatch("logistic Hessian requires w")
        W = self._weights(w)
        probs = softmax(self._X @ W.T, axis=1)
        # A_i = diag(p_i) - p_i p_i^T, assembled class-major into p x p.
        a = -probs[:, :, None] * probs[:, None, :]
        diag = np.arange(self.num_classes)
        a[:, diag, diag] += probs
        h = np.einsum("izy,ia,ib->zayb", a, self._X, self._X, optimize=True)
        h = h.reshape(self.num_params, self.num_params)
        h += self.reg_strength * np.eye(self.num_params)
        return symmetrize(h)

    def gradient_block(self, w: np.ndarray, class_index: int = 0) -> np.ndarray:
        """Slice of the gradient for one class block (class-major layout)."""
        g = self.gradient(w)
        return g[class_index * self.dim:(class_index + 1) * self.dim]


def subset_losses(
    dataset: FeatureDataset,
    split,
    lam: float,
    kind: str = "quadratic",
) -> dict:
    """Convenience: the train/forget/retain subset losses of a split."""
    return {
        "train": SubsetLoss(dataset, split.train_idx, lam, kind),
        "forget": SubsetLoss(dataset, split.forget_idx, lam, kind),
        "retain": SubsetLoss(dataset, split.retain_idx, lam, kind),
    }
