"""Sparse regression by support detection and root finding with line search."""

from .datagen import Dataset, GenSpec, make_dataset
from .losses import LinearLoss, LogisticLoss, SparseCoef
from .metrics import EvalRecord, evaluate
from .oracle import brute_force_best_support, certify_kkt, finite_diff_gradient
from .solver import FitResult, SolverConfig, fit_fixed_step, fit_sdarl
from .tuning import SolutionPath, TuningConfig, fit_asdarl

__all__ = [
    "Dataset", "GenSpec", "make_dataset",
    "LinearLoss", "LogisticLoss", "SparseCoef",
    "EvalRecord", "evaluate",
    "brute_force_best_support", "certify_kkt", "finite_diff_gradient",
    "FitResult", "SolverConfig", "fit_fixed_step", "fit_sdarl",
    "SolutionPath", "TuningConfig", "fit_asdarl",
]
__version__ = "0.1.0"
