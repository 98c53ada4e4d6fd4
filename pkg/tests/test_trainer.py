import numpy as np
import pytest

from sfmu import data
from sfmu.errors import NotConverged, SingularSystem
from sfmu.losses import SubsetLoss
from sfmu.trainer import retrain_oracle, train


class TestQuadratic:
    def test_worked_example_full(self, d1_worked_example):
        ds, split = d1_worked_example
        model = train(SubsetLoss(ds, split.train_idx, lam=1.0))
        assert model.w[0] == pytest.approx(0.25)

    def test_worked_example_retain(self, d1_worked_example):
        ds, split = d1_worked_example
        model = train(SubsetLoss(ds, split.retain_idx, lam=1.0))
        assert model.w[0] == pytest.approx(0.5)

    def test_zero_targets(self):
        ds = data.FeatureDataset(
            features=np.random.default_rng(0).standard_normal((20, 3)),
            labels=np.zeros(20, dtype=np.int64),
            num_classes=2,
            targets=np.zeros((20, 2)),
        )
        model = train(SubsetLoss(ds, np.arange(20), lam=0.3))
        assert np.allclose(model.w, 0.0)

    def test_matches_direct_solve(self, quad_problem):
        ds, split, lam = quad_problem
        loss = SubsetLoss(ds, split.train_idx, lam)
        model = train(loss)
        x = ds.features[split.train_idx]
        t = ds.one_hot_targets()[split.train_idx]
        a = x.T @ x + lam * len(split.train_idx) * np.eye(ds.dim)
        direct = np.linalg.solve(a, x.T @ t).T.ravel()
        assert np.linalg.norm(model.w - direct) <= 1e-10 * np.linalg.norm(direct)

    def test_gradient_norm_recorded(self, quad_problem):
        ds, split, lam = quad_problem
        model = train(SubsetLoss(ds, split.train_idx, lam))
        assert model.metadata["grad_norm"] <= model.metadata["tol"]

    def test_singular_without_regularization(self):
        # fewer samples than features and lam = 0: no unique minimizer
        ds = data.FeatureDataset(
            features=np.random.default_rng(1).standard_normal((3, 6)),
            labels=np.array([0, 1, 0], dtype=np.int64),
            num_classes=2,
        )
        with pytest.raises(SingularSystem):
            train(SubsetLoss(ds, np.arange(3), lam=0.0))


class TestLogistic:
    def test_converges(self, logistic_problem):
        ds, split, lam = logistic_problem
        loss = SubsetLoss(ds, split.train_idx, lam, "logistic")
        model = train(loss)
        assert np.linalg.norm(loss.gradient(model.w)) <= 1e-6

    def test_deterministic(self, logistic_problem):
        ds, split, lam = logistic_problem
        loss = SubsetLoss(ds, split.train_idx, lam, "logistic")
        assert np.array_equal(train(loss).w, train(loss).w)

    def test_not_converged_budget(self, logistic_problem):
        ds, split, lam = logistic_problem
        loss = SubsetLoss(ds, split.train_idx, lam, "logistic")
        with pytest.raises(NotConverged):
            train(loss, max_iter=1)

    def test_numerically_stationary_accepted(self):
        """Large noisy instances hit the loss's float resolution before the
        absolute gradient tolerance; training must still terminate."""
        ds = data.make_synthetic_classification(1000, 6, 3, seed=5, noise=1.2)
        split = data.make_split(np.arange(500), np.arange(500, 1000), 0.1, 14)
        model = retrain_oracle(ds, split, 0.02, "logistic")
        loss = SubsetLoss(ds, split.retain_idx, 0.02, "logistic")
        assert np.linalg.norm(loss.gradient(model.w)) <= 1e-4

    def test_agrees_with_tighter_tolerance(self, logistic_problem):
        """Strong convexity: looser and tighter runs land close together."""
        ds, split, lam = logistic_problem
        loss = SubsetLoss(ds, split.train_idx, lam, "logistic")
        a = train(loss, tol=1e-4).w
        b = train(loss, tol=1e-9).w
        assert np.linalg.norm(a - b) <= 1e-5 * max(np.linalg.norm(b), 1.0)


class TestRetrainOracle:
    def test_tagged(self, quad_problem):
        ds, split, lam = quad_problem
        model = retrain_oracle(ds, split, lam)
        assert model.metadata["oracle"] is True

    def test_equals_retain_training(self, quad_problem):
        ds, split, lam = quad_problem
        oracle = retrain_oracle(ds, split, lam)
        direct = train(SubsetLoss(ds, split.retain_idx, lam))
        assert np.array_equal(oracle.w, direct.w)

    def test_deterministic(self, quad_problem):
        ds, split, lam = quad_problem
        assert np.array_equal(retrain_oracle(ds, split, lam).w,
                              retrain_oracle(ds, split, lam).w)
