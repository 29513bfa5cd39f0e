"""Benchmark forward models, error metrics, and baseline design schemes."""

from .models import (
    ERF_DOMAIN,
    RELIABILITY_DOMAIN,
    TRIG_DOMAIN,
    circle_model,
    erf_model,
    four_branch_model,
    trig_model,
)
from .metrics import (
    FailureEstimate,
    estimate_failure_probability,
    kl_estimate,
    rmse,
    standard_normal_bank,
)
from .kdv import (
    KdvField,
    KdvSetup,
    SolverDiverged,
    default_initial_condition,
    kdv_observable,
    kdv_observable_batch,
    kdv_solve,
    load_kdv_observations,
    make_kdv_setup,
    save_kdv_observations,
    true_posterior_samples,
)
from .problems import (
    LHS_SCHEME,
    ProblemSpec,
    RANDOM_SCHEME,
    baseline_run,
    get_problem,
    list_problems,
    never_stop,
    no_improvement_stop,
    relative_change_stop,
)

__all__ = [
    "ERF_DOMAIN",
    "LHS_SCHEME",
    "RANDOM_SCHEME",
    "RELIABILITY_DOMAIN",
    "TRIG_DOMAIN",
    "FailureEstimate",
    "KdvField",
    "KdvSetup",
    "ProblemSpec",
    "SolverDiverged",
    "baseline_run",
    "circle_model",
    "default_initial_condition",
    "erf_model",
    "estimate_failure_probability",
    "four_branch_model",
    "get_problem",
    "kdv_observable",
    "kdv_observable_batch",
    "kdv_solve",
    "kl_estimate",
    "list_problems",
    "load_kdv_observations",
    "make_kdv_setup",
    "never_stop",
    "no_improvement_stop",
    "relative_change_stop",
    "rmse",
    "save_kdv_observations",
    "standard_normal_bank",
    "trig_model",
    "true_posterior_samples",
]
