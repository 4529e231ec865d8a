"""Joint location-scale-skewness regression under the skew Laplace normal law."""

from .em import (
    EStepCache,
    FitOptions,
    FitResult,
    default_init,
    e_step,
    fit,
    hessian,
    m_step,
    q_value,
    score,
    solve_sym,
)
from .exceptions import (
    FitWarning,
    InferenceError,
    NumericError,
    SlnError,
    StructuralError,
)
from .inference import BootstrapReport, CriteriaReport, bootstrap_se, info_criteria
from .model import (
    Dataset,
    LinPreds,
    Theta,
    linear_predictors,
    observed_loglik,
    validate,
)
from .simulate import (
    BUILTIN_CASES,
    CASE_I,
    CASE_II,
    CASE_III,
    SimCase,
    SimConfig,
    SimTable,
    gen_dataset,
    mse,
    run_mc,
)
from .sln import (
    SlnParams,
    cond_eu1,
    cond_eu2,
    cond_ev2,
    inv_mills,
    log_pdf,
    pdf,
    sample,
    sample_standard,
)

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_CASES",
    "BootstrapReport",
    "CASE_I",
    "CASE_II",
    "CASE_III",
    "CriteriaReport",
    "Dataset",
    "EStepCache",
    "FitOptions",
    "FitResult",
    "FitWarning",
    "InferenceError",
    "LinPreds",
    "NumericError",
    "SimCase",
    "SimConfig",
    "SimTable",
    "SlnError",
    "SlnParams",
    "StructuralError",
    "Theta",
    "bootstrap_se",
    "cond_eu1",
    "cond_eu2",
    "cond_ev2",
    "default_init",
    "e_step",
    "fit",
    "gen_dataset",
    "hessian",
    "info_criteria",
    "inv_mills",
    "linear_predictors",
    "log_pdf",
    "m_step",
    "mse",
    "observed_loglik",
    "pdf",
    "q_value",
    "run_mc",
    "sample",
    "sample_standard",
    "score",
    "solve_sym",
    "validate",
]
