"""Correlation kernel families, validity gates, closed forms and integral ranges.

Four isotropic families are provided: the globally supported Matern model and
three compactly supported ones built on the Gauss hypergeometric function (the
four-parameter family, the Generalized Wendland subfamily and the parsimonious
hypergeometric subfamily that maximises the integral range).  Two support
reparameterisations of the latter recover the Matern model as the shape
parameter grows.

Specs are frozen dataclasses; every operation is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln, gammasgn

from .errors import DomainError, InvalidKernelError
from .specfun import DEFAULT_ACCURACY, bessel_k, gauss_2f1

__all__ = [
    "Matern",
    "GeneralizedWendland",
    "GaussHypergeometric",
    "Hypergeometric",
    "HypergeometricBSupport",
    "HypergeometricMuSupport",
    "KernelSpec",
    "ValidityReport",
    "IntegralRange",
    "validate",
    "correlation",
    "gh_correlation",
    "closed_form_h",
    "effective_support",
    "b_constant",
    "integral_range",
    "integral_range_quadrature",
    "gh_integral_range",
    "matern_integral_range",
    "max_integral_range_params",
    "resolve",
    "as_gauss_hypergeometric",
    "gw_mu_lower_bound",
    "gh_mu_lower_bound",
]

_LN2 = math.log(2.0)
_INT_TOL = 1e-12


def _check_dimension(d):
    if not isinstance(d, (int, np.integer)) or d < 1:
        raise DomainError(f"dimension d must be a positive integer, got {d!r}")


def _check_positive(name, value):
    if not value > 0.0:
        raise DomainError(f"{name} must be strictly positive, got {value}")


@dataclass(frozen=True)
class Matern:
    """Globally supported model with smoothness nu and scale alpha."""

    nu: float
    alpha: float
    d: int

    def __post_init__(self):
        _check_dimension(self.d)
        _check_positive("alpha", self.alpha)


@dataclass(frozen=True)
class GeneralizedWendland:
    """Compactly supported model with smoothness kappa, shape mu, support beta."""

    kappa: float
    mu: float
    beta: float
    d: int

    def __post_init__(self):
        _check_dimension(self.d)
        _check_positive("beta", self.beta)


@dataclass(frozen=True)
class GaussHypergeometric:
    """Four-parameter compactly supported model (delta, beta, gamma, a)."""

    delta: float
    beta: float
    gamma: float
    a: float
    d: int

    def __post_init__(self):
        _check_dimension(self.d)
        _check_positive("a", self.a)


@dataclass(frozen=True)
class Hypergeometric:
    """Parsimonious compactly supported model; valid iff mu >= 1 for any d."""

    kappa: float
    mu: float
    a: float
    d: int

    def __post_init__(self):
        _check_dimension(self.d)
        _check_positive("a", self.a)


@dataclass(frozen=True)
class HypergeometricBSupport:
    """Hypergeometric model with support alpha * B(kappa, mu, d)^(1/(1+2 kappa)).

    Under this reparameterisation mu -> infinity recovers the Matern model
    with smoothness kappa + 1/2 and scale alpha.
    """

    kappa: float
    mu: float
    alpha: float
    d: int

    def __post_init__(self):
        _check_dimension(self.d)
        _check_positive("alpha", self.alpha)


@dataclass(frozen=True)
class HypergeometricMuSupport:
    """Hypergeometric model with support mu * alpha (same Matern limit)."""

    kappa: float
    mu: float
    alpha: float
    d: int

    def __post_init__(self):
        _check_dimension(self.d)
        _check_positive("alpha", self.alpha)


KernelSpec = (
    Matern
    | GeneralizedWendland
    | GaussHypergeometric
    | Hypergeometric
    | HypergeometricBSupport
    | HypergeometricMuSupport
)

_H_LIKE = (Hypergeometric, HypergeometricBSupport, HypergeometricMuSupport)


@dataclass(frozen=True)
class ValidityReport:
    valid: bool
    binding_constraint: str = ""
    lower_bound_mu: float | None = None


@dataclass(frozen=True)
class IntegralRange:
    value: float
    method: str  # "closed_form" or "quadrature"


def gw_mu_lower_bound(kappa, d):
    """Necessary-and-sufficient shape bound for the Generalized Wendland model."""
    if d == 1 and -0.5 < kappa < 0.0:
        return (math.sqrt(8.0 * kappa + 9.0) - 1.0) / 2.0
    return kappa + (d + 1) / 2.0


def gh_mu_lower_bound(kappa, l, d):
    """Shape bound for the (kappa, mu, l) Gauss hypergeometric line, l >= 0."""
    if l < 0:
        raise DomainError("l must be >= 0 (swap beta and gamma first)")
    if l <= d / 2.0 + kappa:
        return d / 2.0 + kappa + 1.0 - l
    return math.sqrt(2.0 * kappa + l * l + d + 1.0) - l


def validate(spec):
    """Check the validity (positive semidefiniteness on R^d) of a kernel spec.

    Invalid parameters come back as ``valid=False`` with the violated
    inequality named, never as an exception.
    """
    if isinstance(spec, Matern):
        if not spec.nu > 0.0:
            return ValidityReport(False, "nu > 0")
        return ValidityReport(True)
    if isinstance(spec, GeneralizedWendland):
        if not spec.kappa > -0.5:
            return ValidityReport(False, "kappa > -1/2")
        bound = gw_mu_lower_bound(spec.kappa, spec.d)
        if spec.mu < bound - _INT_TOL:
            return ValidityReport(False, f"mu >= {bound:.12g}", bound)
        return ValidityReport(True, "", bound)
    if isinstance(spec, _H_LIKE):
        if not spec.kappa > -0.5:
            return ValidityReport(False, "kappa > -1/2")
        if spec.mu < 1.0 - _INT_TOL:
            return ValidityReport(False, "mu >= 1", 1.0)
        return ValidityReport(True, "", 1.0)
    if isinstance(spec, GaussHypergeometric):
        kappa = spec.delta - (spec.d + 1) / 2.0
        if not kappa > -0.5:
            return ValidityReport(False, "delta > d/2")
        beta, gamma = spec.beta, spec.gamma
        if gamma < beta:
            beta, gamma = gamma, beta
        l = gamma - beta
        mu = 2.0 * (beta - spec.delta)
        bound = gh_mu_lower_bound(kappa, l, spec.d)
        if mu < bound - _INT_TOL:
            return ValidityReport(
                False, f"2*(min(beta,gamma) - delta) >= {bound:.12g}", bound
            )
        return ValidityReport(True, "", bound)
    raise DomainError(f"unknown kernel spec {spec!r}")


def _require_valid(spec):
    report = validate(spec)
    if not report.valid:
        raise InvalidKernelError(
            f"invalid kernel {spec!r}: violates {report.binding_constraint}"
        )


def b_constant(kappa, mu, d):
    """Equivalence constant B(kappa, mu, d) of the Matern bridge, in log space."""
    if not kappa > -0.5:
        raise DomainError("b_constant requires kappa > -1/2")
    if not mu >= 1.0:
        raise DomainError("b_constant requires mu >= 1")
    _check_dimension(d)
    return math.exp(
        (2.0 * kappa + 1.0) * _LN2
        + gammaln((mu + 1.0) / 2.0 + kappa)
        + gammaln((mu + d + 1.0) / 2.0 + 2.0 * kappa)
        - gammaln(mu / 2.0)
        - gammaln((mu + d) / 2.0 + kappa)
    )


def resolve(spec):
    """Collapse the support reparameterisations to a plain hypergeometric spec."""
    if isinstance(spec, HypergeometricBSupport):
        a = spec.alpha * b_constant(spec.kappa, spec.mu, spec.d) ** (
            1.0 / (1.0 + 2.0 * spec.kappa)
        )
        return Hypergeometric(spec.kappa, spec.mu, a, spec.d)
    if isinstance(spec, HypergeometricMuSupport):
        return Hypergeometric(spec.kappa, spec.mu, spec.mu * spec.alpha, spec.d)
    return spec


def as_gauss_hypergeometric(spec):
    """Embed a compactly supported spec into the four-parameter family."""
    spec = resolve(spec)
    if isinstance(spec, GaussHypergeometric):
        return spec
    if isinstance(spec, GeneralizedWendland):
        delta = (spec.d + 1) / 2.0 + spec.kappa
        return GaussHypergeometric(
            delta, delta + spec.mu / 2.0, delta + spec.mu / 2.0 + 0.5, spec.beta, spec.d
        )
    if isinstance(spec, Hypergeometric):
        delta = (spec.d + 1) / 2.0 + spec.kappa
        return GaussHypergeometric(
            delta,
            delta + spec.mu / 2.0,
            delta + spec.mu / 2.0 + spec.d / 2.0 + spec.kappa,
            spec.a,
            spec.d,
        )
    raise DomainError("the Matern family has no Gauss hypergeometric embedding")


def effective_support(spec, check=True):
    """Distance beyond which the correlation is exactly zero (inf for Matern)."""
    if check:
        _require_valid(spec)
    spec = resolve(spec)
    if isinstance(spec, Matern):
        return math.inf
    if isinstance(spec, GeneralizedWendland):
        return spec.beta
    return spec.a


# ---------------------------------------------------------------------------
# family evaluators (vectorised, no validity gate)
# ---------------------------------------------------------------------------


def _matern_phi(nu, alpha, x):
    out = np.ones_like(x)
    pos = x > 0.0
    if pos.any():
        r = x[pos] / alpha
        out[pos] = np.exp((1.0 - nu) * _LN2 - gammaln(nu) + nu * np.log(r)) * bessel_k(nu, r)
    return out


def _gw_log_prefactor(kappa, mu):
    # Gamma(kappa)/Gamma(2 kappa) -> 2 as kappa -> 0: the poles cancel.
    if abs(kappa) < _INT_TOL:
        log_ratio, sign = _LN2, 1.0
    else:
        log_ratio = gammaln(kappa) - gammaln(2.0 * kappa)
        sign = gammasgn(kappa) * gammasgn(2.0 * kappa)
    log_ratio += gammaln(2.0 * kappa + mu + 1.0) - gammaln(kappa + mu + 1.0) - (mu + 1.0) * _LN2
    return log_ratio, sign


def _gw_phi(kappa, mu, beta, x, acc):
    out = np.zeros_like(x)
    inside = x < beta
    if inside.any():
        w = 1.0 - (x[inside] / beta) ** 2
        logp, sign = _gw_log_prefactor(kappa, mu)
        f = gauss_2f1(mu / 2.0, (mu + 1.0) / 2.0, kappa + mu + 1.0, w, acc)
        with np.errstate(divide="ignore"):
            out[inside] = sign * np.exp(logp + (kappa + mu) * np.log(w)) * f
    out[x == 0.0] = 1.0
    return out


def _gh_phi(delta, beta, gamma, a, d, x, acc):
    out = np.zeros_like(x)
    inside = x < a
    if inside.any():
        w = 1.0 - (x[inside] / a) ** 2
        c = beta - delta + gamma - d / 2.0
        logp = (
            gammaln(beta - d / 2.0)
            + gammaln(gamma - d / 2.0)
            - gammaln(c)
            - gammaln(delta - d / 2.0)
        )
        f = gauss_2f1(beta - delta, gamma - delta, c, w, acc)
        with np.errstate(divide="ignore"):
            out[inside] = np.exp(logp + (c - 1.0) * np.log(w)) * f
    out[x == 0.0] = 1.0
    return out


def _h_phi_general(kappa, mu, a, d, x, acc):
    g = as_gauss_hypergeometric(Hypergeometric(kappa, mu, a, d))
    return _gh_phi(g.delta, g.beta, g.gamma, g.a, g.d, x, acc)


# ---------------------------------------------------------------------------
# closed forms of the hypergeometric model
# ---------------------------------------------------------------------------


def _int_or_none(value, tol=_INT_TOL):
    r = round(value)
    return int(r) if abs(value - r) < tol else None


def _h_dim1_integer_kappa(k, mu, a, x):
    """d = 1, integer kappa, mu >= 1: exponential-free truncated form."""
    out = np.zeros_like(x)
    inside = x < a
    t = x[inside] / a
    logpref = 0.5 * math.log(math.pi) + gammaln(mu / 2.0 + 2.0 * k + 1.0) - gammaln(k + 0.5)
    acc = np.zeros_like(t)
    for n in range(k + 1):
        logc = (
            gammaln(n + k + 1.0)
            - 2.0 * n * _LN2
            - gammaln(n + 1.0)
            - gammaln(n + mu / 2.0 + k + 1.0)
            - gammaln(k - n + 1.0)
        )
        acc += math.exp(logc) * t ** (k - n) * (1.0 - t) ** (2 * n)
    out[inside] = math.exp(logpref) * (1.0 - t) ** (mu + 2 * k) * acc
    return out


def _h_odd_dim_kappa0(mu, a, d, x):
    """d odd, kappa = 0, mu >= 1: truncated polynomial in x/a."""
    half = (d - 1) // 2
    out = np.zeros_like(x)
    inside = x < a
    t = x[inside] / a
    logc = (
        (mu + half) * _LN2
        + gammaln((mu + 1.0) / 2.0)
        + gammaln((mu + d + 1.0) / 2.0)
        - 0.5 * math.log(math.pi)
    )
    acc = np.zeros_like(t)
    poch1 = 1.0  # (-half)_n
    poch2 = 1.0  # (half + 1)_n
    fact = 1.0
    for n in range(half + 1):
        coef = poch1 * poch2 / (2.0**n * fact * math.gamma(n + half + mu + 1.0))
        acc += coef * (1.0 - t) ** n
        poch1 *= -half + n
        poch2 *= half + 1.0 + n
        fact *= n + 1.0
    out[inside] = math.exp(logc) * (1.0 - t) ** (mu + half) * acc
    return out


def _gamma_half(two_x):
    """Gamma(two_x / 2) for positive integer two_x, as (Fraction, sqrt(pi) power)."""
    if two_x % 2 == 0:
        return Fraction(math.factorial(two_x // 2 - 1)), 0
    m = (two_x - 1) // 2
    return Fraction(math.factorial(2 * m), 4**m * math.factorial(m)), 1


def _kappa0_odd_dim_coeffs(mu, big_d):
    """Exact rational coefficients in t = x/a of the kappa = 0 closed form."""
    g1, p1 = _gamma_half(mu + 1)
    g2, p2 = _gamma_half(mu + big_d + 1)
    assert p1 + p2 == 1  # the sqrt(pi) from the prefactor cancels
    c_front = Fraction(2) ** (mu + (big_d - 1) // 2) * g1 * g2
    half = (big_d - 1) // 2
    coeffs = [Fraction(0)] * (mu + big_d)
    for n in range(half + 1):
        poch1 = Fraction(1)
        poch2 = Fraction(1)
        for j in range(n):
            poch1 *= -half + j
            poch2 *= half + 1 + j
        cn = c_front * poch1 * poch2 / (
            Fraction(2) ** n * math.factorial(n) * math.factorial(n + half + mu)
        )
        order = mu + half + n
        for j in range(order + 1):
            coeffs[j] += cn * Fraction((-1) ** j * math.comb(order, j))
    return coeffs


def _montee_step(coeffs):
    """One upgrading step: q(t) = int_t^1 u p(u) du, normalised to q(0) = 1."""
    total = sum(c / (j + 2) for j, c in enumerate(coeffs))
    out = [total] + [Fraction(0)] * (len(coeffs) + 1)
    for j, c in enumerate(coeffs):
        out[j + 2] -= c / (j + 2)
    return [c / total for c in out]


@lru_cache(maxsize=512)
def _upgraded_polynomial(k, mu, d):
    """Closed-form coefficients for d odd, integer kappa = k >= 1, integer mu.

    Built by k exact upgrading steps applied to the kappa = 0 polynomial in
    dimension d + 2k; rational arithmetic end to end.
    """
    coeffs = _kappa0_odd_dim_coeffs(mu, d + 2 * k)
    for _ in range(k):
        coeffs = _montee_step(coeffs)
    return tuple(float(c) for c in coeffs)


def _poly_phi(coeffs, a, x):
    out = np.zeros_like(x)
    inside = x < a
    t = x[inside] / a
    acc = np.zeros_like(t)
    for c in reversed(coeffs):
        acc = acc * t + c
    out[inside] = acc
    return out


def _h_dim2_circular(a, x):
    out = np.zeros_like(x)
    inside = x < a
    t = x[inside] / a
    w = np.sqrt(np.maximum(1.0 - t * t, 0.0))
    out[inside] = 2.0 / math.pi * (np.arcsin(w) - t * w)
    return out


def _h_dim2_half_kappa(a, x):
    # Derived from the Euler integral of the Gauss series; the upgrading of
    # order 1 of the spherical model.  Finite at t = 0 where atanh(1) blows up,
    # so that point is set directly.
    out = np.zeros_like(x)
    inside = (x > 0.0) & (x < a)
    t = x[inside] / a
    w = np.sqrt(np.maximum(1.0 - t * t, 0.0))
    t2 = t * t
    out[inside] = (1.0 + t2 / 2.0) * w - t2 * (2.0 - t2 / 2.0) * np.arctanh(w)
    out[x == 0.0] = 1.0
    return out


def _h_dim2_kappa1(a, x):
    out = np.zeros_like(x)
    inside = x < a
    t = x[inside] / a
    w2 = np.maximum(1.0 - t * t, 0.0)
    w = np.sqrt(w2)
    out[inside] = (
        2.0
        / (3.0 * math.pi)
        * (t * w * (15.0 - 4.0 * w2 * (3.0 - t * t)) + 3.0 * (6.0 * w2 - 5.0) * np.arcsin(w))
    )
    return out


def _h_closed_form_evaluator(kappa, mu, a, d):
    """Vectorised closed-form evaluator for the hypergeometric model, or None."""
    if mu < 1.0 - _INT_TOL or not kappa > -0.5:
        return None
    if d == 2 and abs(mu - 1.0) < _INT_TOL:
        if abs(kappa) < _INT_TOL:
            return lambda x: _h_dim2_circular(a, x)
        if abs(kappa - 0.5) < _INT_TOL:
            return lambda x: _h_dim2_half_kappa(a, x)
        if abs(kappa - 1.0) < _INT_TOL:
            return lambda x: _h_dim2_kappa1(a, x)
        return None
    k = _int_or_none(kappa)
    if d == 1 and k is not None and k >= 0:
        return lambda x: _h_dim1_integer_kappa(k, mu, a, x)
    if d % 2 == 1 and abs(kappa) < _INT_TOL:
        return lambda x: _h_odd_dim_kappa0(mu, a, d, x)
    mu_int = _int_or_none(mu)
    if d % 2 == 1 and k is not None and k >= 0 and mu_int is not None and mu_int >= 1:
        coeffs = _upgraded_polynomial(k, mu_int, d)
        return lambda x: _poly_phi(coeffs, a, x)
    return None


def closed_form_h(kappa, mu, a, d, x):
    """Closed-form hypergeometric correlation where a fast path exists.

    Covers d = 1 with integer kappa; odd d with kappa = 0; odd d with integer
    kappa and integer mu (truncated polynomials); and the tabulated d = 2,
    mu = 1 cases kappa in {0, 1/2, 1}.  Returns None when no closed form
    applies.
    """
    _check_dimension(d)
    _check_positive("a", a)
    fn = _h_closed_form_evaluator(kappa, mu, a, d)
    if fn is None:
        return None
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    if scalar:
        arr = arr.reshape(1)
    if arr.size and float(arr.min()) < 0.0:
        raise DomainError("distance x must be >= 0")
    out = fn(arr)
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# correlation dispatch
# ---------------------------------------------------------------------------


def correlation(spec, x, method="auto", check=True, accuracy=DEFAULT_ACCURACY):
    """Correlation phi(x) of a kernel spec at distance(s) x >= 0.

    ``x`` may be a scalar or ndarray.  Compactly supported families return
    exactly 0.0 for x >= the effective support and exactly 1.0 at x = 0.
    ``method`` selects the hypergeometric evaluation path: "auto" prefers a
    closed form, "general" forces the Gauss-series path, "closed_form"
    requires one to exist.
    """
    if method not in ("auto", "general", "closed_form"):
        raise DomainError(f"unknown method {method!r}")
    if check:
        _require_valid(spec)
    spec = resolve(spec)
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    if scalar:
        arr = arr.reshape(1)
    if arr.size and float(arr.min()) < 0.0:
        raise DomainError("distance x must be >= 0")
    if isinstance(spec, Matern):
        if method == "closed_form":
            raise DomainError("no closed-form dispatch for the Matern family")
        out = _matern_phi(spec.nu, spec.alpha, arr)
    elif isinstance(spec, GeneralizedWendland):
        if method == "closed_form":
            raise DomainError("no closed-form dispatch for the Generalized Wendland family")
        out = _gw_phi(spec.kappa, spec.mu, spec.beta, arr, accuracy)
    elif isinstance(spec, GaussHypergeometric):
        if method == "closed_form":
            raise DomainError("no closed-form dispatch for raw Gauss hypergeometric specs")
        out = _gh_phi(spec.delta, spec.beta, spec.gamma, spec.a, spec.d, arr, accuracy)
    else:
        fn = None
        if method in ("auto", "closed_form"):
            fn = _h_closed_form_evaluator(spec.kappa, spec.mu, spec.a, spec.d)
        if method == "closed_form" and fn is None:
            raise DomainError(f"no closed form for {spec!r}")
        if fn is not None:
            out = fn(arr)
        else:
            out = _h_phi_general(spec.kappa, spec.mu, spec.a, spec.d, arr, accuracy)
    return float(out[0]) if scalar else out


def gh_correlation(delta, beta, gamma, a, d, x, accuracy=DEFAULT_ACCURACY):
    """Four-parameter Gauss hypergeometric correlation at distance(s) x.

    Symmetric in (beta, gamma); exactly zero for x >= a.
    """
    spec = GaussHypergeometric(delta, beta, gamma, a, d)
    _require_valid(spec)
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    if scalar:
        arr = arr.reshape(1)
    if arr.size and float(arr.min()) < 0.0:
        raise DomainError("distance x must be >= 0")
    out = _gh_phi(delta, beta, gamma, a, d, arr, accuracy)
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# integral range
# ---------------------------------------------------------------------------


def matern_integral_range(nu, alpha, d):
    """Closed-form integral range of the Matern model."""
    if nu <= 0 or alpha <= 0:
        raise DomainError("matern_integral_range requires nu > 0 and alpha > 0")
    return alpha**d * math.pi ** (d / 2.0) * math.exp(gammaln(nu + d / 2.0) - gammaln(nu))


def gh_integral_range(kappa, mu, l, a, d):
    """Closed-form integral range on the (kappa, mu, l, a) line."""
    return a**d * math.exp(
        0.5 * d * math.log(math.pi)
        + gammaln((d + 1.0) / 2.0 + kappa)
        + gammaln((mu + 1.0) / 2.0 + kappa)
        + gammaln((mu + 1.0) / 2.0 + kappa + l)
        - d * _LN2
        - gammaln(kappa + 0.5)
        - gammaln((mu + 1.0 + d) / 2.0 + kappa)
        - gammaln((mu + 1.0 + d) / 2.0 + kappa + l)
    )


def radial_weight(d):
    """Constant of the radial integral-range form, pi^(d/2)/(2^(d-1) Gamma(d/2))."""
    return math.pi ** (d / 2.0) / (2.0 ** (d - 1) * math.gamma(d / 2.0))


def integral_range_quadrature(spec, check=True):
    """Integral range by adaptive quadrature of the radial form."""
    if check:
        _require_valid(spec)
    spec = resolve(spec)
    d = spec.d
    weight = radial_weight(d)

    def integrand(u):
        return u ** (d - 1) * correlation(spec, u, check=False)

    support = effective_support(spec, check=False)
    if math.isfinite(support):
        # some kernels vanish to high order at the support edge, which trips
        # quad's round-off detector at very tight absolute tolerances
        total, _ = quad(integrand, 0.0, support, limit=200, epsabs=1e-11, epsrel=1e-10)
        return weight * total
    # Matern: extend the window until the added tail is negligible.
    upper = 20.0 * spec.alpha * max(1.0, spec.nu)
    total, _ = quad(integrand, 0.0, upper, limit=400, epsabs=1e-13, epsrel=1e-10)
    for _ in range(60):
        piece, _ = quad(integrand, upper, 2.0 * upper, limit=200, epsabs=1e-14, epsrel=1e-10)
        total += piece
        upper *= 2.0
        if abs(piece) < 1e-13 * abs(total):
            break
    return weight * total


def integral_range(spec, check=True):
    """Integral range of a valid spec; closed form where one exists."""
    if check:
        _require_valid(spec)
    rspec = resolve(spec)
    if isinstance(rspec, Matern):
        return IntegralRange(matern_integral_range(rspec.nu, rspec.alpha, rspec.d), "closed_form")
    if isinstance(rspec, Hypergeometric):
        l = rspec.d / 2.0 + rspec.kappa
        return IntegralRange(
            gh_integral_range(rspec.kappa, rspec.mu, l, rspec.a, rspec.d), "closed_form"
        )
    if isinstance(rspec, GaussHypergeometric):
        kappa = rspec.delta - (rspec.d + 1) / 2.0
        beta, gamma = sorted((rspec.beta, rspec.gamma))
        mu = 2.0 * (beta - rspec.delta)
        l = gamma - beta
        return IntegralRange(
            gh_integral_range(kappa, mu, l, rspec.a, rspec.d), "closed_form"
        )
    return IntegralRange(integral_range_quadrature(rspec, check=False), "quadrature")


def max_integral_range_params(kappa, d):
    """Shape parameters maximising the integral range at unit support.

    Returns (l_star, mu_star, a_max): the second-shape offset d/2 + kappa, the
    shape lower bound 1, and the achieved maximum.
    """
    if not kappa > -0.5:
        raise DomainError("max_integral_range_params requires kappa > -1/2")
    _check_dimension(d)
    l_star = d / 2.0 + kappa
    return l_star, 1.0, gh_integral_range(kappa, 1.0, l_star, 1.0, d)
