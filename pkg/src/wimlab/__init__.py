"""wimlab: Wasserstein information geometry for 1-d parametric families.

Computes Wasserstein score functions and information matrices, verifies the
Wasserstein-Cramer-Rao bound for statistics, simulates online natural-gradient
estimation with selectable score kind, and certifies log-Sobolev/Poincare
constants inside families via the relative-entropy Hessian criterion.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DimensionMismatch,
    DivisionByZero,
    DomainError,
    DomainEscape,
    InsufficientData,
    NonCdfInput,
    NonDifferentiableMetric,
    NotSmooth,
    NotWellDefined,
    QuadratureFailure,
    SingularWIM,
    StepTooSmall,
    SupportMismatch,
    WimlabError,
)
from .families import (
    Distribution1D,
    FamilyDescriptor,
    ProductFamily,
    cdf,
    cdf_param_grad,
    check_theta,
    density,
    exponential,
    gaussian,
    laplacian,
    location_scale,
    location_scale_transport_map,
    product,
    quantile,
    relu_family,
    resolve_family,
    sample,
    semicircle,
    uniform,
)
from .geometry import (
    InfoMatrix,
    expectation,
    fim,
    fisher_score,
    poisson_residual,
    w2_distance_1d,
    wasserstein_score,
    wasserstein_score_grad,
    wim,
    wim_from_distance,
)
from .estimation import (
    CramerRaoReport,
    Statistic,
    cramer_rao,
    efficiency_residual,
    expectation_param_grad,
    polynomial_statistic,
    wasserstein_covariance,
)
from .dynamics import (
    DOMAIN_FLOOR,
    RateFit,
    ScoreKind,
    TrajectoryState,
    VarianceCurve,
    default_record_grid,
    fit_rate,
    poincare_alpha,
    predict_variance_curve,
    run_ensemble,
    score_sensitivity,
    step,
)
from .functional import (
    EntropyReport,
    HessianReport,
    LsiCertificate,
    default_lsi_grid,
    entropy,
    entropy_report,
    lsi_ratio,
    max_certifiable_alpha,
    relative_entropy,
    relative_entropy_grad,
    relative_fisher_info,
    riw_check,
    wasserstein_christoffel,
    wasserstein_hessian,
)
from .cli import ExperimentConfig, ResultBundle, main, run_config

__all__ = [name for name in dir() if not name.startswith("_")]
