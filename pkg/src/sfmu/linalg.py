"""Dense symmetric-matrix primitives: SPD solves, PSD projection, norms.

All routines operate on square numpy arrays in float64 and treat the input
as symmetric (the upper triangle is authoritative where it matters).
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NotPositiveDefinite

__all__ = [
    "EigenDecomposition",
    "symmetrize",
    "check_symmetric",
    "sym_eigh",
    "solve_spd",
    "project_psd",
    "frobenius_norm",
    "spectral_norm",
    "smallest_eigenvalue",
]


class EigenDecomposition(NamedTuple):
    """Eigenvalues sorted descending with matching orthonormal columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Return the symmetric part (a + a.T) / 2 as float64."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    return 0.5 * (a + a.T)


def check_symmetric(a: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Validate symmetry (relative to the Frobenius norm) and return float64."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    scale = max(np.linalg.norm(a), 1.0)
    if np.max(np.abs(a - a.T)) > rtol * scale:
        raise DimensionMismatch("matrix is not symmetric")
    return a


def sym_eigh(a: np.ndarray) -> EigenDecomposition:
    """Symmetric eigendecomposition with eigenvalues sorted descending."""
    a = symmetrize(a)
    vals, vecs = np.linalg.eigh(a)
    order = np.argsort(vals)[::-1]
    return EigenDecomposition(vals[order], vecs[:, order])


def solve_spd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a @ x = b for symmetric positive definite a via Cholesky.

    Raises NotPositiveDefinite when the factorization hits a non-positive
    pivot. b may be a vector or a matrix of stacked right-hand sides.
    """
    a = symmetrize(a)
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != a.shape[0]:
        raise DimensionMismatch(
            f"rhs of length {b.shape[0]} for a {a.shape[0]}x{a.shape[0]} matrix"
        )
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    return scipy.linalg.cho_solve(factor, b, check_finite=False)


def project_psd(a: np.ndarray) -> np.ndarray:
    """Frobenius-nearest PSD matrix: clamp negative eigenvalues to zero."""
    decomp = sym_eigh(a)
    clamped = np.maximum(decomp.eigenvalues, 0.0)
    v = decomp.eigenvectors
    return symmetrize((v * clamped) @ v.T)


def frobenius_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=np.float64)))


def spectral_norm(a: np.ndarray) -> float:
    vals = np.linalg.eigvalsh(symmetrize(a))
    return float(np.max(np.abs(vals)))


def smallest_eigenvalue(a: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(symmetrize(a))[0])
