"""Variance-aware sample trimming for average-treatment-effect estimation.

The package estimates per-unit nuisances (propensity, outcome means,
outcome variances) by cross-fitting, converts them into a per-unit
variance contribution, trims the sample at a data-driven cut-off, and
reports doubly-robust effect estimates with pointwise and simultaneous
confidence intervals on the retained sub-population.
"""

from .analysis import (
    AnalysisConfig,
    AnalysisReport,
    RuleResult,
    ValidationError,
    emit_report,
    ingest_csv,
    load_config,
    parse_config,
    run_analysis,
)
from .estimator import (
    EffectEstimate,
    aipw_scores,
    estimate_effect,
    normal_ci,
    standard_error,
    trimmed_estimate,
)
from .nuisance import (
    Dataset,
    NuisanceDiagnostics,
    NuisanceEstimates,
    conditional_variance_from_moments,
    cross_fit_nuisances,
)
from .regressors import (
    BaggedTreesRegressor,
    KnnRegressor,
    RegressorSpec,
    fit_regressor,
    register_regressor,
)
from .simharness import (
    CoverageReport,
    CoverageRow,
    DgpConfig,
    DgpTruth,
    PathRow,
    coverage_study,
    generate_dgp,
    trim_path,
)
from .simultaneous import (
    DegenerateReplicateError,
    SimulConfig,
    SimulResult,
    SimulRow,
    bootstrap_statistic,
    simultaneous_trim,
)
from .trimming import (
    TrimResult,
    TrimSpec,
    apply_trim,
    compute_khat,
    gamma_constant,
    gamma_fraction,
    gamma_varmin,
    select_gamma,
    varmin_objective,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisConfig",
    "AnalysisReport",
    "BaggedTreesRegressor",
    "CoverageReport",
    "CoverageRow",
    "Dataset",
    "DegenerateReplicateError",
    "DgpConfig",
    "DgpTruth",
    "EffectEstimate",
    "KnnRegressor",
    "NuisanceDiagnostics",
    "NuisanceEstimates",
    "PathRow",
    "RegressorSpec",
    "RuleResult",
    "SimulConfig",
    "SimulResult",
    "SimulRow",
    "TrimResult",
    "TrimSpec",
    "ValidationError",
    "aipw_scores",
    "apply_trim",
    "bootstrap_statistic",
    "compute_khat",
    "conditional_variance_from_moments",
    "coverage_study",
    "cross_fit_nuisances",
    "emit_report",
    "estimate_effect",
    "fit_regressor",
    "gamma_constant",
    "gamma_fraction",
    "gamma_varmin",
    "generate_dgp",
    "ingest_csv",
    "load_config",
    "normal_ci",
    "parse_config",
    "register_regressor",
    "run_analysis",
    "select_gamma",
    "simultaneous_trim",
    "standard_error",
    "trim_path",
    "trimmed_estimate",
    "varmin_objective",
]
