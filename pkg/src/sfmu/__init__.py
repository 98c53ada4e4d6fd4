"""Source-free machine unlearning for L2-regularized linear classifiers.

Trains convex linear (and linearized-network) classifiers, estimates the
retain-data Hessian from forget-set perturbation probes, applies the
Newton-step removal update, and evaluates unlearning quality against a
retrain-from-scratch oracle.
"""

from .baselines import BaselineConfig, run_baseline
from .data import (
    FeatureDataset,
    SplitSpec,
    load_features,
    make_split,
    make_synthetic_classification,
    save_features,
)
from .estimator import (
    HessianEstimate,
    PerturbationSet,
    estimate_retain_hessian,
    lemma1_bound,
    make_perturbation_set,
    sample_probes,
    surrogate_objective,
    surrogate_residual,
    verify_optimal_M,
    verify_quartic_identity,
)
from .evaluation import EvalReport, accuracy, emit_table, mia_score, theorem1_check
from .linalg import frobenius_norm, project_psd, solve_spd, sym_eigh
from .losses import SubsetLoss
from .mixed_linear import LinearizedProblem, load_linearized, run_mixed_linear
from .trainer import LinearModel, retrain_oracle, train
from .unlearner import EstimatorSettings, UnlearnConfig, unlearn, unlearn_pipeline

__version__ = "0.1.0"

__all__ = [
    "BaselineConfig",
    "EstimatorSettings",
    "EvalReport",
    "FeatureDataset",
    "HessianEstimate",
    "LinearModel",
    "LinearizedProblem",
    "PerturbationSet",
    "SplitSpec",
    "SubsetLoss",
    "UnlearnConfig",
    "accuracy",
    "emit_table",
    "estimate_retain_hessian",
    "frobenius_norm",
    "lemma1_bound",
    "load_features",
    "load_linearized",
    "make_perturbation_set",
    "make_split",
    "make_synthetic_classification",
    "mia_score",
    "project_psd",
    "retrain_oracle",
    "run_baseline",
    "run_mixed_linear",
    "sample_probes",
    "save_features",
    "solve_spd",
    "surrogate_objective",
    "surrogate_residual",
    "sym_eigh",
    "theorem1_check",
    "train",
    "unlearn",
    "unlearn_pipeline",
    "verify_optimal_M",
    "verify_quartic_identity",
]
