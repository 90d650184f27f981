"""Within-cohort transfer learning for high-dimensional linear regression.

A target outcome's coefficient vector is modelled as a combination of lasso
fits to related (auxiliary) outcomes measured on the same samples plus a
sparse correction. The package covers estimation, debiased inference,
auxiliary selection, a simulation harness, and CSV/CLI plumbing.
"""

from .estimator import CommitConfig, CommitFit, Dataset, fit_commit, predict
from .exceptions import CommitError, DataError, NumericalError, UsageError
from .inference import (
    InferenceConfig,
    InferenceResult,
    bh_adjust,
    debias_commit,
    debias_lasso,
    estimate_sigma0,
    nodewise_residuals,
)
from .selection import select_auxiliary
from .simulation import SimConfig, run_study
from .solver import PenaltySpec, SolverOptions, solve_cv, solve_penalized_ls

__all__ = [
    "CommitConfig",
    "CommitError",
    "CommitFit",
    "DataError",
    "Dataset",
    "InferenceConfig",
    "InferenceResult",
    "NumericalError",
    "PenaltySpec",
    "SimConfig",
    "SolverOptions",
    "UsageError",
    "bh_adjust",
    "debias_commit",
    "debias_lasso",
    "estimate_sigma0",
    "fit_commit",
    "nodewise_residuals",
    "predict",
    "run_study",
    "select_auxiliary",
    "solve_cv",
    "solve_penalized_ls",
]
