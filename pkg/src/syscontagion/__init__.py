"""Calibration and validation toolkit for an exchangeable contagion credit-risk model.

Default times are ``tau_k = min(X_0, X_k)`` where a systemic shock ``X_0`` and
idiosyncratic shocks ``X_k`` are coupled by a Gumbel copula. The package
evaluates the model's copulas and Kendall's taus, fits ``(alpha, theta)`` to
panels of default intensities, extracts the implied systemic intensity and
checks the straight-line diagnostic. A trivariate nested-Gumbel extension and
a Monte Carlo oracle cover the rest.
"""

__version__ = "0.1.0"

from .copula import (
    GumbelGenerator,
    ModelParams,
    ShockIntensities,
    TauMatrix,
    alphas_from_intensities,
    bivariate_copula,
    joint_survival,
    kendall_tau_general,
    marginal_survival,
    psi,
    psi_inv,
    shocks_from_alphas,
    survival_copula,
    tau_mo,
    tau_pair,
    tau_systemic,
)
from .dataio import IngestConfig, SpreadPanel, ingest, spread_to_intensity, survival_from_intensity
from .diagnostics import SpecCheckReport, SystemicSeries, emit_scatter, extract_systemic_intensity, systemic_tau_profile
from .estimation import (
    FitConfig,
    FitResult,
    fit,
    fit_theta_fixed_alphas,
    harmonic_mean_alpha,
    objective,
    pairwise_tau_matrix,
    rolling_fit,
)
from .estimators import ContagionEstimator, CreditTriangleTransformer
from .exceptions import (
    ArgumentError,
    ConsistencyError,
    ContagionError,
    DegenerateModelError,
    DomainError,
    ExtractionError,
    IdentifiabilityWarning,
    IngestionError,
    NestingError,
    NumericError,
    UndefinedTauError,
    UnfittableError,
)
from .hac import HacSpec, g_inverse, hac_bivariate_copula, hac_kendall_tau, hac_marginal_survival, kendall_function
from .kendall import empirical_kendall_tau
from .panel import IntensityPanel
from .sampling import (
    SimConfig,
    empirical_tau_mc,
    sample_gumbel_vector,
    sample_positive_stable,
    simulate_default_times,
    simulate_hac_triple,
    synthetic_panel,
)
