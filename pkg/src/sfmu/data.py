"""Feature datasets, splits, and the binary artifact formats.

File formats (little-endian throughout):

  SFUFEAT1  features: 8-byte magic, u32 n, u32 d, u32 k,
            n*d float32 features (row-major), n u32 labels.
  SFUMODL1  model: 8-byte magic, u32 p, p float64 parameters.
  SFUHESS1  Hessian: 8-byte magic, u32 p, p*p float64 entries (row-major).

Split files are newline-delimited decimal indices, one file per role.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    DimensionMismatch,
    FractionOutOfRange,
    LabelOutOfRange,
    TruncatedFile,
)

FEATURE_MAGIC = b"SFUFEAT1"
MODEL_MAGIC = b"SFUMODL1"
HESSIAN_MAGIC = b"SFUHESS1"

_SPLIT_ROLES = ("train", "test", "forget", "retain")


@dataclass(frozen=True)
class FeatureDataset:
    """n labeled feature vectors; optionally real-valued regression targets."""

    features: np.ndarray  # n x d, float64
    labels: np.ndarray  # n, int64 class indices in [0, k)
    num_classes: int
    normalized: bool = False
    # Real-valued n x k targets override one-hot labels for the quadratic
    # loss (used by the mixed-linear path).
    targets: np.ndarray | None = None

    def __post_init__(self):
        if self.features.ndim != 2:
            raise DimensionMismatch("features must be a 2-D array")
        if self.labels.shape != (self.features.shape[0],):
            raise DimensionMismatch("labels must match the sample count")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise LabelOutOfRange(
                f"labels must lie in [0, {self.num_classes})"
            )
        if self.targets is not None and self.targets.shape != (
            self.features.shape[0],
            self.num_classes,
        ):
            raise DimensionMismatch("targets must be n x k")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def one_hot_targets(self) -> np.ndarray:
        if self.targets is not None:
            return self.targets
        out = np.zeros((self.n, self.num_classes))
        out[np.arange(self.n), self.labels] = 1.0
        return out


@dataclass(frozen=True)
class SplitSpec:
    """Train/test partition plus a forget/retain partition of the train set."""

    train_idx: np.ndarray
    test_idx: np.ndarray
    forget_idx: np.ndarray
    retain_idx: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.retain_idx is None:
            retain = np.setdiff1d(self.train_idx, self.forget_idx)
            object.__setattr__(self, "retain_idx", retain)
        forget = set(self.forget_idx.tolist())
        retain = set(self.retain_idx.tolist())
        train = set(self.train_idx.tolist())
        if forget & retain:
            raise FractionOutOfRange("forget and retain sets overlap")
        if forget | retain != train:
            raise FractionOutOfRange("forget and retain sets must partition train")
        if not forget or not retain:
            raise FractionOutOfRange("forget and retain sets must be non-empty")

    @property
    def n_forget(self) -> int:
        return len(self.forget_idx)


def forget_count(n_train: int, forget_fraction: float) -> int:
    """Round fraction*n_train to nearest, ties toward the larger count."""
    return int(np.floor(forget_fraction * n_train + 0.5))


def make_split(
    train_idx: np.ndarray,
    test_idx: np.ndarray,
    forget_fraction: float,
    seed: int,
) -> SplitSpec:
    """Draw a forget subset uniformly without replacement from the train set."""
    train_idx = np.asarray(train_idx, dtype=np.int64)
    test_idx = np.asarray(test_idx, dtype=np.int64)
    if not 0.0 < forget_fraction < 1.0:
        raise FractionOutOfRange(f"forget_fraction={forget_fraction} not in (0, 1)")
    n_f = forget_count(len(train_idx), forget_fraction)
    if n_f < 1 or n_f >= len(train_idx):
        raise FractionOutOfRange(
            f"forget_fraction={forget_fraction} yields n_f={n_f} "
            f"for n_train={len(train_idx)}"
        )
    rng = np.random.default_rng(seed)
    forget = np.sort(rng.choice(train_idx, size=n_f, replace=False))
    return SplitSpec(train_idx=train_idx, test_idx=test_idx, forget_idx=forget)


def stack_train_test(train: FeatureDataset, test: FeatureDataset) -> tuple[FeatureDataset, np.ndarray, np.ndarray]:
    """Concatenate a train and a test dataset into one indexable dataset."""
    if train.dim != test.dim or train.num_classes != test.num_classes:
        raise DimensionMismatch("train/test datasets disagree on d or k")
    ds = FeatureDataset(
        features=np.concatenate([train.features, test.features]),
        labels=np.concatenate([train.labels, test.labels]),
        num_classes=train.num_classes,
        normalized=train.normalized and test.normalized,
    )
    return ds, np.arange(train.n), np.arange(train.n, train.n + test.n)


def normalize_rows(ds: FeatureDataset) -> FeatureDataset:
    """Globally rescale features so the largest row L2 norm is 1."""
    norms = np.linalg.norm(ds.features, axis=1)
    scale = norms.max()
    if scale <= 0.0:
        return replace(ds, normalized=True)
    return replace(ds, features=ds.features / scale, normalized=True)


# ---------------------------------------------------------------------------
# Binary persistence


def _read_exact(fh, size: int, what: str) -> bytes:
    buf = fh.read(size)
    if len(buf) != size:
        raise TruncatedFile(f"file ended while reading {what}")
    return buf


def save_features(path: str | Path, ds: FeatureDataset) -> None:
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<III", ds.n, ds.dim, ds.num_classes))
        fh.write(np.ascontiguousarray(ds.features, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(ds.labels, dtype="<u4").tobytes())


def load_features(path: str | Path, normalize: bool = False) -> FeatureDataset:
    with open(path, "rb") as fh:
        magic = fh.read(len(FEATURE_MAGIC))
        if magic != FEATURE_MAGIC:
            raise BadMagic(f"{path}: expected {FEATURE_MAGIC!r}, got {magic!r}")
        n, d, k = struct.unpack("<III", _read_exact(fh, 12, "header"))
        feats = np.frombuffer(
            _read_exact(fh, n * d * 4, "features"), dtype="<f4"
        ).reshape(n, d).astype(np.float64)
        labels = np.frombuffer(
            _read_exact(fh, n * 4, "labels"), dtype="<u4"
        ).astype(np.int64)
    if labels.size and labels.max() >= k:
        raise LabelOutOfRange(f"{path}: label {labels.max()} >= k={k}")
    ds = FeatureDataset(features=feats, labels=labels, num_classes=k)
    return normalize_rows(ds) if normalize else ds


def save_model(path: str | Path, w: np.ndarray) -> None:
    w = np.asarray(w, dtype=np.float64).ravel()
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", w.size))
        fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())


def load_model(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(len(MODEL_MAGIC))
        if magic != MODEL_MAGIC:
            raise BadMagic(f"{path}: expected {MODEL_MAGIC!r}, got {magic!r}")
        (p,) = struct.unpack("<I", _read_exact(fh, 4, "header"))
        return np.frombuffer(_read_exact(fh, p * 8, "parameters"), dtype="<f8").copy()


def save_hessian(path: str | Path, h: np.ndarray) -> None:
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DimensionMismatch("Hessian must be square")
    with open(path, "wb") as fh:
        fh.write(HESSIAN_MAGIC)
        fh.write(struct.pack("<I", h.shape[0]))
        fh.write(np.ascontiguousarray(h, dtype="<f8").tobytes())


def load_hessian(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(len(HESSIAN_MAGIC))
        if magic != HESSIAN_MAGIC:
            raise BadMagic(f"{path}: expected {HESSIAN_MAGIC!r}, got {magic!r}")
        (p,) = struct.unpack("<I", _read_exact(fh, 4, "header"))
        buf = _read_exact(fh, p * p * 8, "entries")
        return np.frombuffer(buf, dtype="<f8").reshape(p, p).copy()


def save_split(directory: str | Path, split: SplitSpec) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for role in _SPLIT_ROLES:
        idx = getattr(split, f"{role}_idx")
        (directory / f"{role}.idx").write_text(
            "\n".join(str(int(i)) for i in idx) + "\n"
        )


def load_split(directory: str | Path) -> SplitSpec:
    directory = Path(directory)
    parts = {}
    for role in _SPLIT_ROLES:
        text = (directory / f"{role}.idx").read_text()
        parts[f"{role}_idx"] = np.array(
            [int(line) for line in text.split() if line], dtype=np.int64
        )
    return SplitSpec(**parts)


# ---------------------------------------------------------------------------
# Synthetic data for desk-scale experiments


def make_synthetic_classification(
    n: int,
    d: int,
    k: int,
    seed: int,
    class_sep: float = 1.0,
    noise: float = 1.0,
    unit_norm: bool = True,
) -> FeatureDataset:
    """Gaussian-blob classification data, optionally rescaled to ||x|| <= 1."""
    rng = np.random.default_rng(seed)
    means = rng.standard_normal((k, d))
    means *= class_sep / np.linalg.norm(means, axis=1, keepdims=True)
    labels = rng.integers(0, k, size=n)
    feats = means[labels] + noise * rng.standard_normal((n, d))
    ds = FeatureDataset(features=feats, labels=labels.astype(np.int64), num_classes=k)
    return normalize_rows(ds) if unit_norm else ds
