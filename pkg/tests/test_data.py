import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfmu import data
from sfmu.errors import (
    BadMagic,
    DimensionMismatch,
    FractionOutOfRange,
    LabelOutOfRange,
    TruncatedFile,
)


def small_dataset():
    return data.FeatureDataset(
        features=np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]),
        labels=np.array([0, 1], dtype=np.int64),
        num_classes=2,
    )


class TestFeatureFiles:
    def test_round_trip(self, tmp_path):
        ds = small_dataset()
        path = tmp_path / "feat.bin"
        data.save_features(path, ds)
        loaded = data.load_features(path)
        assert loaded.n == 2 and loaded.dim == 3 and loaded.num_classes == 2
        assert np.array_equal(loaded.features, ds.features)
        assert np.array_equal(loaded.labels, ds.labels)

    def test_round_trip_bit_exact(self, tmp_path):
        ds = data.make_synthetic_classification(50, 7, 4, seed=1)
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        data.save_features(p1, ds)
        data.save_features(p2, data.load_features(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_label_out_of_range(self, tmp_path):
        path = tmp_path / "feat.bin"
        data.save_features(path, small_dataset())
        raw = bytearray(path.read_bytes())
        raw[-8:-4] = (7).to_bytes(4, "little")  # first label -> 7 with k=2
        path.write_bytes(bytes(raw))
        with pytest.raises(LabelOutOfRange):
            data.load_features(path)

    def test_empty_file_bad_magic(self, tmp_path):
        path = tmp_path / "empty.bin"
        path.write_bytes(b"")
        with pytest.raises(BadMagic):
            data.load_features(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "feat.bin"
        data.save_features(path, small_dataset())
        path.write_bytes(path.read_bytes()[:-6])
        with pytest.raises(TruncatedFile):
            data.load_features(path)

    def test_normalize_on_load(self, tmp_path):
        path = tmp_path / "feat.bin"
        data.save_features(path, small_dataset())
        ds = data.load_features(path, normalize=True)
        assert ds.normalized
        assert np.linalg.norm(ds.features, axis=1).max() == pytest.approx(1.0)


class TestModelHessianFiles:
    def test_model_round_trip(self, tmp_path):
        w = np.linspace(-1, 1, 9)
        data.save_model(tmp_path / "m.bin", w)
        assert np.array_equal(data.load_model(tmp_path / "m.bin"), w)

    def test_model_bad_magic(self, tmp_path):
        (tmp_path / "m.bin").write_bytes(b"WRONGMAG" + b"\0" * 16)
        with pytest.raises(BadMagic):
            data.load_model(tmp_path / "m.bin")

    def test_hessian_round_trip(self, tmp_path):
        h = np.arange(16.0).reshape(4, 4)
        data.save_hessian(tmp_path / "h.bin", h)
        assert np.array_equal(data.load_hessian(tmp_path / "h.bin"), h)

    def test_hessian_must_be_square(self, tmp_path):
        with pytest.raises(DimensionMismatch):
            data.save_hessian(tmp_path / "h.bin", np.ones((2, 3)))


class TestSplits:
    def test_forget_count_rounding(self):
        assert data.forget_count(100, 0.10) == 10
        assert data.forget_count(1000, 0.15) == 150
        # ties round toward the larger forget count
        assert data.forget_count(10, 0.25) == 3
        assert data.forget_count(10, 0.35) == 4

    def test_deterministic(self):
        train, test = np.arange(100), np.arange(100, 120)
        a = data.make_split(train, test, 0.1, seed=5)
        b = data.make_split(train, test, 0.1, seed=5)
        assert np.array_equal(a.forget_idx, b.forget_idx)
        assert len(a.forget_idx) == 10

    def test_fraction_out_of_range(self):
        train, test = np.arange(10), np.arange(10, 12)
        for frac in (0.0, 1.0, -0.1, 0.01):
            with pytest.raises(FractionOutOfRange):
                data.make_split(train, test, frac, seed=0)

    def test_overlap_rejected(self):
        with pytest.raises(FractionOutOfRange):
            data.SplitSpec(
                train_idx=np.arange(4),
                test_idx=np.arange(4, 6),
                forget_idx=np.array([0, 1]),
                retain_idx=np.array([1, 2, 3]),
            )

    @given(st.integers(5, 200), st.floats(0.05, 0.5), st.integers(0, 100))
    @settings(max_examples=30, deadline=None)
    def test_partition(self, n_train, frac, seed):
        train, test = np.arange(n_train), np.arange(n_train, n_train + 5)
        try:
            split = data.make_split(train, test, frac, seed)
        except FractionOutOfRange:
            return
        merged = np.sort(np.concatenate([split.forget_idx, split.retain_idx]))
        assert np.array_equal(merged, train)
        assert len(np.intersect1d(split.forget_idx, split.retain_idx)) == 0

    def test_save_load_split(self, tmp_path):
        split = data.make_split(np.arange(30), np.arange(30, 40), 0.2, 7)
        data.save_split(tmp_path / "split", split)
        loaded = data.load_split(tmp_path / "split")
        for role in ("train", "test", "forget", "retain"):
            assert np.array_equal(getattr(loaded, f"{role}_idx"),
                                  getattr(split, f"{role}_idx"))


class TestSynthetic:
    def test_deterministic(self):
        a = data.make_synthetic_classification(40, 5, 3, seed=2)
        b = data.make_synthetic_classification(40, 5, 3, seed=2)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)

    def test_unit_norm(self):
        ds = data.make_synthetic_classification(60, 6, 2, seed=4)
        assert np.linalg.norm(ds.features, axis=1).max() <= 1.0 + 1e-12
        assert ds.normalized

    def test_stack_train_test(self):
        tr = data.make_synthetic_classification(30, 4, 2, seed=1)
        te = data.make_synthetic_classification(10, 4, 2, seed=2)
        ds, tr_idx, te_idx = data.stack_train_test(tr, te)
        assert ds.n == 40
        assert np.array_equal(tr_idx, np.arange(30))
        assert np.array_equal(te_idx, np.arange(30, 40))

    def test_dataset_validation(self):
        with pytest.raises(LabelOutOfRange):
            data.FeatureDataset(
                features=np.ones((2, 2)),
                labels=np.array([0, 5], dtype=np.int64),
                num_classes=2,
            )
        with pytest.raises(DimensionMismatch):
            data.FeatureDataset(
                features=np.ones((2, 2)),
                labels=np.array([0], dtype=np.int64),
                num_classes=2,
            )
