"""Evaluation metrics: split accuracies, loss-threshold MIA, parameter
distance to the retrain oracle, and the gradient-residual bound check."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .data import FeatureDataset, SplitSpec
from .errors import EmptyIndexSet
from .losses import SubsetLoss
from .trainer import LinearModel

CSV_COLUMNS = (
    "method",
    "setting",
    "test",
    "remaining",
    "forget",
    "mia",
    "param_dist",
    "grad_residual",
)


@dataclass
class EvalReport:
    method: str
    setting: str
    test_acc: float
    remain_acc: float
    forget_acc: float
    mia_score: float
    param_dist: float = math.nan
    grad_residual: float = math.nan
    theorem1_bound: float = math.nan


def predictions(w: np.ndarray, ds: FeatureDataset, idx: np.ndarray) -> np.ndarray:
    """Argmax class predictions; ties break toward the lowest class index."""
    W = np.asarray(w, dtype=np.float64).reshape(ds.num_classes, ds.dim)
    scores = ds.features[idx] @ W.T
    return np.argmax(scores, axis=1)


def accuracy(w: np.ndarray, ds: FeatureDataset, idx: np.ndarray) -> float:
    """Percentage of argmax-correct predictions over the index set."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0:
        raise EmptyIndexSet("accuracy over an empty index set")
    pred = predictions(w, ds, idx)
    return 100.0 * float(np.mean(pred == ds.labels[idx]))


def _threshold_accuracy(values: np.ndarray, labels: np.ndarray,
                        thresholds: np.ndarray) -> tuple[float, float, bool]:
    """Best (accuracy, threshold, below_means_member) on the given data."""
    below = values[None, :] <= thresholds[:, None]
    acc_below = np.mean(below == labels[None, :], axis=1)
    acc_above = 1.0 - acc_below
    i_b = int(np.argmax(acc_below))
    i_a = int(np.argmax(acc_above))
    if acc_below[i_b] >= acc_above[i_a]:
        return float(acc_below[i_b]), float(thresholds[i_b]), True
    return float(acc_above[i_a]), float(thresholds[i_a]), False


def mia_score(
    model: LinearModel,
    ds: FeatureDataset,
    forget_idx: np.ndarray,
    test_idx: np.ndarray,
    seed: int = 0,
    folds: int = 5,
    one_sided: bool = False,
) -> float:
    """Loss-threshold membership attack accuracy, percent.

    Forget samples are labeled members; an equal-size random subsample of
    the test set labels non-members. A one-dimensional threshold classifier
    on per-sample loss is fit by k-fold cross-validation and the mean
    held-out accuracy is reported. 50 means the two loss distributions are
    indistinguishable. The raw score is reported by default; one_sided=True
    reflects scores below 50 to max(score, 100 - score).
    """
    forget_idx = np.asarray(forget_idx, dtype=np.int64)
    test_idx = np.asarray(test_idx, dtype=np.int64)
    if forget_idx.size == 0 or test_idx.size == 0:
        raise EmptyIndexSet("MIA requires non-empty forget and test sets")
    rng = np.random.default_rng(seed)
    size = min(forget_idx.size, test_idx.size)
    members = forget_idx if forget_idx.size == size else np.sort(
        rng.choice(forget_idx, size=size, replace=False)
    )
    nonmembers = np.sort(rng.choice(test_idx, size=size, replace=False))

    full = SubsetLoss(ds, np.concatenate([members, nonmembers]), lam=0.0,
                      kind=model.kind)
    values = full.sample_losses(model.w)
    labels = np.concatenate([np.ones(size, dtype=bool), np.zeros(size, dtype=bool)])

    order = rng.permutation(values.size)
    values, labels = values[order], labels[order]
    fold_ids = np.arange(values.size) % folds

    accs = []
    for fold in range(folds):
        hold = fold_ids == fold
        v_tr, y_tr = values[~hold], labels[~hold]
        v_ho, y_ho = values[hold], labels[hold]
        uniq = np.unique(v_tr)
        mids = (uniq[:-1] + uniq[1:]) / 2.0 if uniq.size > 1 else uniq
        thresholds = np.concatenate(([uniq[0] - 1.0], mids, [uniq[-1] + 1.0]))
        _, thr, below = _threshold_accuracy(v_tr, y_tr, thresholds)
        pred = v_ho <= thr if below else v_ho > thr
        accs.append(float(np.mean(pred == y_ho)))
    score = 100.0 * float(np.mean(accs))
    return max(score, 100.0 - score) if one_sided else score


@dataclass
class Theorem1Report:
    residual: float
    bound_exact_form: float
    bound_closed_form: float
    holds: bool
    degenerate: bool = False


def theorem1_check(
    model_uf: LinearModel,
    retain_loss: SubsetLoss,
    gamma: float,
    grad_bound: float,
    lam: float,
    n: int,
    n_f: int,
    eps: float,
    d: int,
    atol: float = 0.0,
) -> Theorem1Report:
    """Compare the retain gradient residual at w_uf against both bound forms.

    bound_exact_form = gamma * (n - n_f) * ||H^-1 grad_f||^2 using the
    recorded removal step; bound_closed_form substitutes the conservative
    gradient bound and the eps-driven smallest-eigenvalue estimate. A
    non-positive denominator is reported as degenerate, not raised.
    """
    residual = float(np.linalg.norm(retain_loss.gradient(model_uf.w)))
    step = model_uf.metadata.get("newton_step")
    n_r = n - n_f

    if gamma == 0.0:
        exact_bound = 0.0
        closed_bound = 0.0
        degenerate = False
    else:
        exact_bound = gamma * n_r * float(np.linalg.norm(step)) ** 2 if step is not None else math.nan
        denom = lam * n_r - 2.0 * eps / (2.0 + d)
        degenerate = denom <= 0.0
        closed_bound = (
            math.nan if degenerate else 4.0 * gamma * grad_bound**2 * n_f**2 * n_r / denom**2
        )
    holds = (not degenerate) and residual <= closed_bound + atol
    return Theorem1Report(
        residual=residual,
        bound_exact_form=exact_bound,
        bound_closed_form=closed_bound,
        holds=holds,
        degenerate=degenerate,
    )


def evaluate_model(
    model: LinearModel,
    ds: FeatureDataset,
    split: SplitSpec,
    method: str,
    setting: str = "",
    reference: LinearModel | None = None,
    retain_loss: SubsetLoss | None = None,
    mia_seed: int = 0,
) -> EvalReport:
    """Full metric row for one model; reference enables the parameter
    distance, retain_loss the gradient residual."""
    report = EvalReport(
        method=method,
        setting=setting,
        test_acc=accuracy(model.w, ds, split.test_idx),
        remain_acc=accuracy(model.w, ds, split.retain_idx),
        forget_acc=accuracy(model.w, ds, split.forget_idx),
        mia_score=mia_score(model, ds, split.forget_idx, split.test_idx, seed=mia_seed),
    )
    if reference is not None:
        report.param_dist = float(np.linalg.norm(model.w - reference.w))
    if retain_loss is not None:
        report.grad_residual = float(np.linalg.norm(retain_loss.gradient(model.w)))
    return report


def emit_table(reports: list[EvalReport]) -> str:
    """Stable-column CSV over report rows."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        writer.writerow([
            r.method,
            r.setting,
            f"{r.test_acc:.4f}",
            f"{r.remain_acc:.4f}",
            f"{r.forget_acc:.4f}",
            f"{r.mia_score:.4f}",
            "" if math.isnan(r.param_dist) else f"{r.param_dist:.6e}",
            "" if math.isnan(r.grad_residual) else f"{r.grad_residual:.6e}",
        ])
    return buf.getvalue()


def summary_block(report: EvalReport) -> str:
    """key=value text summary of one report."""
    lines = [
        f"method={report.method}",
        f"setting={report.setting}",
        f"test_acc={report.test_acc:.4f}",
        f"remain_acc={report.remain_acc:.4f}",
        f"forget_acc={report.forget_acc:.4f}",
        f"mia_score={report.mia_score:.4f}",
        f"param_dist={report.param_dist:.6e}",
        f"grad_residual={report.grad_residual:.6e}",
    ]
    return "\n".join(lines) + "\n"
