"""Compactly supported Gauss-hypergeometric correlation kernels.

Validity checking, closed forms, spectral densities, sparse covariance
assembly, Gaussian random-field simulation, maximum-likelihood estimation and
simple kriging for the Matern / Generalized Wendland / Gauss hypergeometric /
hypergeometric correlation families.
"""

from .errors import (
    AccuracyError,
    DomainError,
    FitError,
    HyperkernelError,
    InvalidKernelError,
    NotPositiveDefiniteError,
)
from .kernels import (
    GaussHypergeometric,
    GeneralizedWendland,
    Hypergeometric,
    HypergeometricBSupport,
    HypergeometricMuSupport,
    IntegralRange,
    KernelSpec,
    Matern,
    ValidityReport,
    b_constant,
    closed_form_h,
    correlation,
    effective_support,
    gh_correlation,
    gh_integral_range,
    integral_range,
    max_integral_range_params,
    validate,
)
from .covmat import CholFactor, CovMatrix, PointSet, assemble, cholesky, pairwise_dist, simple_krige, solve
from .mle import FitConfig, FitResult, fit, loglik, microergodic, profile_loglik, sigma2_hat, std_errors
from .sim import (
    GridDesign,
    McStudyConfig,
    McStudyReport,
    McStudyRow,
    empirical_semivariogram,
    perturbed_grid,
    run_mc_study,
    simulate_gaussian,
    tukey_h,
)
from .specfun import DEFAULT_ACCURACY, Accuracy, bessel_k, gauss_2f1, gen_1f2, log_gamma
from .spectral import gh_spectral, hankel_spectral_quadrature, matern_spectral

__version__ = "0.1.0"
