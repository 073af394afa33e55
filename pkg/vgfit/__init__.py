"""vgfit: Variance-Gamma return models fitted by FRFT characteristic-function inversion."""

__version__ = "1.0.0"

# Core models
from .models import (
    PARAM_NAMES,
    ClmParams,
    FitConfig,
    FitReport,
    FitSummary,
    FrftGrid,
    IterationRow,
    KsResult,
    OutlierRule,
    RemovedObservation,
    ReturnSample,
    RunConfig,
    RunSpec,
    StepDamping,
    VgParams,
)

# Fractional Fourier transform
from .frft import fft, frft, frft_direct, ifft, invert_cf, tail_magnitude

# Variance-Gamma distribution
from .variance_gamma import (
    HESSIAN_PAIRS,
    DensityGrid,
    cdf_grid,
    cf,
    cf_gradient,
    cf_hessian,
    clm_density,
    density_grid,
    eval_at,
    grid_moments,
    mixture_density,
    moments,
    sample,
)

# Likelihood and fitting
from .likelihood import LikelihoodState, evaluate
from .optimizer import (
    clm_loglik,
    fit_clm,
    fit_mle,
    init_method_of_moments,
    params_from_moments,
    standard_errors,
)

# Goodness of fit
from .ks import (
    kolmogorov_asymptotic_cdf,
    ks_null_cdf,
    ks_null_pdf,
    ks_statistic,
    ks_test,
    model_cdf,
    p_value,
    pelz_good_cdf,
)

# Data and artifacts
from .data import (
    PriceSeries,
    calibrate_threshold,
    filter_outliers,
    load_prices,
    load_report,
    load_returns,
    load_trace,
    log_returns,
    save_grid,
    save_report,
    save_sample,
    save_trace,
)

# Configuration
from .config import config_from_dict, config_to_yaml, load_config

# Tables
from .tables import format_density_table, format_estimates_table, format_ks_table, format_trace_table

# Exceptions
from .errors import (
    ConfigError,
    ConvergenceError,
    DataError,
    DiagnosticsError,
    GridContractError,
    GridSizeError,
    GridSupportError,
    KsDomainError,
    ModelCdfError,
    MomentsError,
    NumericalError,
    ReportError,
    TailDecayWarning,
    VgfitError,
)

__all__ = [
    # Version
    "__version__",
    # Models
    "PARAM_NAMES",
    "ClmParams",
    "FitConfig",
    "FitReport",
    "FitSummary",
    "FrftGrid",
    "IterationRow",
    "KsResult",
    "OutlierRule",
    "RemovedObservation",
    "ReturnSample",
    "RunConfig",
    "RunSpec",
    "StepDamping",
    "VgParams",
    # FRFT
    "fft",
    "ifft",
    "frft",
    "frft_direct",
    "invert_cf",
    "tail_magnitude",
    # Variance-Gamma
    "HESSIAN_PAIRS",
    "DensityGrid",
    "cf",
    "cf_gradient",
    "cf_hessian",
    "density_grid",
    "cdf_grid",
    "eval_at",
    "moments",
    "grid_moments",
    "sample",
    "clm_density",
    "mixture_density",
    # Fitting
    "LikelihoodState",
    "evaluate",
    "fit_mle",
    "init_method_of_moments",
    "params_from_moments",
    "fit_clm",
    "clm_loglik",
    "standard_errors",
    # Goodness of fit
    "ks_statistic",
    "ks_null_cdf",
    "ks_null_pdf",
    "p_value",
    "ks_test",
    "model_cdf",
    "kolmogorov_asymptotic_cdf",
    "pelz_good_cdf",
    # Data
    "PriceSeries",
    "load_prices",
    "log_returns",
    "filter_outliers",
    "calibrate_threshold",
    "load_returns",
    "save_sample",
    "save_trace",
    "load_trace",
    "save_grid",
    "save_report",
    "load_report",
    # Configuration
    "load_config",
    "config_from_dict",
    "config_to_yaml",
    # Tables
    "format_trace_table",
    "format_density_table",
    "format_estimates_table",
    "format_ks_table",
    # Exceptions
    "VgfitError",
    "ConfigError",
    "GridSizeError",
    "KsDomainError",
    "DataError",
    "ReportError",
    "NumericalError",
    "GridContractError",
    "GridSupportError",
    "DiagnosticsError",
    "MomentsError",
    "ModelCdfError",
    "ConvergenceError",
    "TailDecayWarning",
]
