"""Shared synthetic fixtures for the test suite."""

import numpy as np
import pytest

from sfmu import data
from sfmu.losses import SubsetLoss


@pytest.fixture
def quad_problem():
    """Small quadratic-loss problem: dataset, split, lam."""
    ds = data.make_synthetic_classification(240, 8, 3, seed=3)
    split = data.make_split(np.arange(200), np.arange(200, 240), 0.1, 3)
    return ds, split, 0.1


@pytest.fixture
def logistic_problem():
    ds = data.make_synthetic_classification(240, 5, 3, seed=11)
    split = data.make_split(np.arange(200), np.arange(200, 240), 0.1, 11)
    return ds, split, 0.1


@pytest.fixture
def d1_worked_example():
    """Two scalar samples x=1 with targets 1 and 0, lam=1.

    Closed form: w* = 0.25 on the full data, w_r = 0.5 on sample 1 alone,
    forget gradient at w* is 0.5 and the retain Hessian is 2.
    """
    ds = data.FeatureDataset(
        features=np.array([[1.0], [1.0]]),
        labels=np.array([0, 0], dtype=np.int64),
        num_classes=1,
        targets=np.array([[1.0], [0.0]]),
    )
    split = data.SplitSpec(
        train_idx=np.array([0, 1]),
        test_idx=np.array([0]),
        forget_idx=np.array([1]),
    )
    return ds, split


def subset_triple(ds, split, lam, kind="quadratic"):
    return (
        SubsetLoss(ds, split.train_idx, lam, kind),
        SubsetLoss(ds, split.forget_idx, lam, kind),
        SubsetLoss(ds, split.retain_idx, lam, kind),
    )
