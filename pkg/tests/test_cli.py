import numpy as np
import pytest

from sfmu import data
from sfmu.cli import main


@pytest.fixture
def problem_files(tmp_path):
    """Train/test feature files plus a config pointing at them."""
    ds = data.make_synthetic_classification(300, 6, 3, seed=1)
    train_ds = data.FeatureDataset(features=ds.features[:240],
                                   labels=ds.labels[:240], num_classes=3)
    test_ds = data.FeatureDataset(features=ds.features[240:],
                                  labels=ds.labels[240:], num_classes=3)
    data.save_features(tmp_path / "train.bin", train_ds)
    data.save_features(tmp_path / "test.bin", test_ds)
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        f"features={tmp_path / 'train.bin'}\n"
        f"test_features={tmp_path / 'test.bin'}\n"
        "lambda=0.1\nforget_fraction=0.1\nsplit_seed=4\nm=120\n"
    )
    return tmp_path, cfg


class TestCommands:
    def test_train(self, problem_files, capsys):
        tmp, cfg = problem_files
        assert main(["train", "--config", str(cfg), "--out", str(tmp / "o")]) == 0
        assert (tmp / "o" / "model.bin").exists()
        assert (tmp / "o" / "manifest.txt").exists()

    def test_retrain(self, problem_files):
        tmp, cfg = problem_files
        assert main(["retrain", "--config", str(cfg), "--out", str(tmp / "o")]) == 0
        assert (tmp / "o" / "model_retrained.bin").exists()
        assert (tmp / "o" / "split" / "forget.idx").exists()

    def test_estimate(self, problem_files):
        tmp, cfg = problem_files
        assert main(["estimate", "--config", str(cfg), "--out", str(tmp / "o")]) == 0
        report = (tmp / "o" / "estimate_report.txt").read_text()
        assert "residual=" in report
        assert "bound_per_eps=" in report
        h = data.load_hessian(tmp / "o" / "hessian.bin")
        assert h.shape == (6, 6)

    def test_unlearn(self, problem_files, capsys):
        tmp, cfg = problem_files
        assert main(["unlearn", "--config", str(cfg), "--out", str(tmp / "o")]) == 0
        table = (tmp / "o" / "report.csv").read_text()
        lines = table.strip().split("\n")
        assert lines[0].startswith("method,setting,test,")
        assert len(lines) == 3
        assert "retrained" in lines[1] and "unlearned(-)" in lines[2]
        assert (tmp / "o" / "summary.txt").exists()

    def test_unlearn_rerun_byte_identical(self, problem_files):
        tmp, cfg = problem_files
        main(["unlearn", "--config", str(cfg), "--out", str(tmp / "a")])
        main(["unlearn", "--config", str(cfg), "--out", str(tmp / "b")])
        for name in ("model_unlearned.bin", "hessian.bin", "report.csv"):
            assert (tmp / "a" / name).read_bytes() == (tmp / "b" / name).read_bytes()

    def test_sweep(self, problem_files, monkeypatch):
        monkeypatch.setenv("SFMU_THREADS", "2")
        tmp, cfg = problem_files
        rc = main(["sweep", "--config", str(cfg), "--out", str(tmp / "o"),
                   "--axis", "m", "--values", "60,120"])
        assert rc == 0
        lines = (tmp / "o" / "sweep.csv").read_text().strip().split("\n")
        assert len(lines) == 5  # header + 2 rows per value

    def test_verify_passes(self, capsys):
        assert main(["verify"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 5
        assert "FAIL" not in out


class TestExitCodes:
    def test_usage_error_unknown_command(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1

    def test_usage_error_bad_config(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("loss=hinge\n")
        assert main(["train", "--config", str(cfg)]) == 1

    def test_missing_config_file(self, tmp_path):
        assert main(["train", "--config", str(tmp_path / "nope.cfg")]) == 1

    def test_missing_data_file_names_path(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("features=/nonexistent/feat.bin\n"
                       "test_features=/nonexistent/test.bin\n")
        assert main(["train", "--config", str(cfg)]) == 2
        assert "/nonexistent/feat.bin" in capsys.readouterr().err

    def test_numeric_failure(self, tmp_path):
        # lam = 0 with fewer samples than features: singular training system
        rng = np.random.default_rng(0)
        ds = data.FeatureDataset(features=rng.standard_normal((4, 8)),
                                 labels=np.array([0, 1, 0, 1], dtype=np.int64),
                                 num_classes=2)
        data.save_features(tmp_path / "train.bin", ds)
        data.save_features(tmp_path / "test.bin", ds)
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            f"features={tmp_path / 'train.bin'}\n"
            f"test_features={tmp_path / 'test.bin'}\n"
            "lambda=0\nforget_fraction=0.25\n")
        assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
