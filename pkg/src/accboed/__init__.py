"""Accelerated Bayesian optimal experimental design toolkit.

Sequential design of experiments with Gaussian process surrogates: candidate
designs are scored by the expected information gain about a parameter of
interest, estimated either by the exact-but-slow nested Monte Carlo route or
by an accelerated route that replaces per-pair GP conditioning with a learned
conditional density (a kernel mixture network) over covariance-filtered
samples.  Reliability, parameter-estimation, and surrogate-building benchmark
problems plus a configuration-driven command line front end are included.
"""

__version__ = "0.1.0"

from .engine import (  # noqa: E402
    AccBoedConfig,
    DesignChoice,
    RunRecord,
    RunResult,
    UtilityEstimate,
    acc_boed_run,
    build_cde_dataset,
    estimate_utility_acc,
    estimate_utility_basic,
    informative_region,
    load_records_csv,
    optimize_design,
    save_records_csv,
    save_summary_json,
    select_informative_samples,
    sweep_utilities,
)
from .gaussians import DegenerateRatio, RatioGaussian, ScalarGaussian, gaussian_kl, gaussian_ratio
from .gp import (
    Dataset,
    GaussianPrediction,
    GpModel,
    KernelSpec,
    append_observation,
    build_gp,
    fit_gp,
    predict,
    predict_constrained,
    predict_mean_var,
)
from .kmn import CdeRecord, InsufficientData, KmnConfig, KmnModel, train_kmn
from .poi import McmcConfig, PoiKind, SampleSet, SamplerStuck, mh_sample, save_samples_csv
from .sampling import grid_candidates, lhs_sample, uniform_sample

__all__ = [
    "__version__",
    "AccBoedConfig",
    "DesignChoice",
    "RunRecord",
    "RunResult",
    "UtilityEstimate",
    "acc_boed_run",
    "build_cde_dataset",
    "estimate_utility_acc",
    "estimate_utility_basic",
    "informative_region",
    "load_records_csv",
    "optimize_design",
    "save_records_csv",
    "save_summary_json",
    "select_informative_samples",
    "sweep_utilities",
    "DegenerateRatio",
    "RatioGaussian",
    "ScalarGaussian",
    "gaussian_kl",
    "gaussian_ratio",
    "Dataset",
    "GaussianPrediction",
    "GpModel",
    "KernelSpec",
    "append_observation",
    "build_gp",
    "fit_gp",
    "predict",
    "predict_constrained",
    "predict_mean_var",
    "CdeRecord",
    "InsufficientData",
    "KmnConfig",
    "KmnModel",
    "train_kmn",
    "McmcConfig",
    "PoiKind",
    "SampleSet",
    "SamplerStuck",
    "mh_sample",
    "save_samples_csv",
    "grid_candidates",
    "lhs_sample",
    "uniform_sample",
]
