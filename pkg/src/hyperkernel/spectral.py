"""Isotropic spectral densities and a Hankel-transform quadrature oracle.

The closed-form densities (`matern_spectral`, `gh_spectral`) are what the
kernels imply analytically; `hankel_spectral_quadrature` computes the same
quantity by direct numerical Hankel transform of the correlation function and
serves as the independent cross-check, including for invalid parameter sets
whose "density" goes negative.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln, jv

from . import kernels
from .errors import AccuracyError, DomainError
from .specfun import DEFAULT_ACCURACY, gen_1f2

__all__ = [
    "matern_spectral",
    "gh_spectral",
    "hankel_spectral_quadrature",
]

_LN2 = math.log(2.0)


def matern_spectral(nu, alpha, d, z):
    """Spectral density of the Matern model at frequency z >= 0."""
    if nu <= 0 or alpha <= 0:
        raise DomainError("matern_spectral requires nu > 0 and alpha > 0")
    kernels._check_dimension(d)
    arr = np.asarray(z, dtype=float)
    scalar = arr.ndim == 0
    if arr.size and float(arr.min()) < 0.0:
        raise DomainError("frequency z must be >= 0")
    pref = math.exp(gammaln(nu + d / 2.0) - gammaln(nu) - 0.5 * d * math.log(math.pi))
    out = pref * alpha**d / (1.0 + (alpha * arr) ** 2) ** (nu + d / 2.0)
    return float(out) if scalar else out


def gh_spectral(delta, beta, gamma, a, d, z, accuracy=DEFAULT_ACCURACY):
    """Spectral density of the Gauss hypergeometric family at z >= 0.

    Requires the positivity conditions delta > d/2,
    2 (beta - delta) (gamma - delta) >= delta and beta + gamma >= 3 delta + 1/2.
    Covers the Generalized Wendland and hypergeometric subfamilies through
    their (delta, beta, gamma) embeddings.
    """
    kernels._check_dimension(d)
    if a <= 0:
        raise DomainError("support a must be positive")
    slack = 1e-9
    if not delta > d / 2.0:
        raise DomainError(f"positivity requires delta > d/2, got delta={delta}, d={d}")
    if 2.0 * (beta - delta) * (gamma - delta) < delta - slack:
        raise DomainError("positivity requires 2 (beta-delta)(gamma-delta) >= delta")
    if beta + gamma < 3.0 * delta + 0.5 - slack:
        raise DomainError("positivity requires beta + gamma >= 3 delta + 1/2")
    arr = np.asarray(z, dtype=float)
    scalar = arr.ndim == 0
    if arr.size and float(arr.min()) < 0.0:
        raise DomainError("frequency z must be >= 0")
    logpref = (
        gammaln(delta)
        + gammaln(beta - d / 2.0)
        + gammaln(gamma - d / 2.0)
        + d * math.log(a)
        - d * _LN2
        - 0.5 * d * math.log(math.pi)
        - gammaln(delta - d / 2.0)
        - gammaln(beta)
        - gammaln(gamma)
    )
    f = gen_1f2(delta, beta, gamma, -((arr * a) ** 2) / 4.0, accuracy)
    out = math.exp(logpref) * f
    return float(out) if scalar else out


def _bessel_zero_knots(order, z, upper, max_knots=100000):
    """McMahon approximations of J_order zeros, rescaled to frequency z."""
    knots = []
    k = 1
    while True:
        u = (k + order / 2.0 - 0.25) * math.pi / z
        if u >= upper or len(knots) >= max_knots:
            break
        if u > 0:
            knots.append(u)
        k += 1
    return knots


def _euler_accelerated(partial_terms):
    """Euler transformation (repeated averaging of partial sums)."""
    s = np.cumsum(partial_terms)
    while s.size > 1:
        s = 0.5 * (s[1:] + s[:-1])
    return float(s[0])


def _radial_moment(spec, d, quad_tol):
    """Integral of u^(d-1) phi(u) du over [0, inf), with its error estimate."""

    def integrand(u):
        return u ** (d - 1) * kernels.correlation(spec, u, check=False)

    support = kernels.effective_support(spec, check=False)
    if math.isfinite(support):
        return quad(integrand, 0.0, support, limit=200, epsabs=quad_tol, epsrel=1e-10)
    upper = 20.0 * spec.alpha * max(1.0, spec.nu)
    total, err = quad(integrand, 0.0, upper, limit=400, epsabs=quad_tol, epsrel=1e-10)
    for _ in range(60):
        piece, perr = quad(integrand, upper, 2.0 * upper, limit=200, epsabs=quad_tol, epsrel=1e-10)
        total += piece
        err += perr
        upper *= 2.0
        if abs(piece) < 1e-14 * max(abs(total), 1.0):
            break
    return total, err


def hankel_spectral_quadrature(spec, z, abs_tol=1e-7):
    """Isotropic spectral density by direct Hankel-transform quadrature.

    Splits the oscillatory integrand at the Bessel zeros; for the globally
    supported Matern family the alternating segment series is summed with
    Euler acceleration.  Only absolute integrability is required, so invalid
    compactly supported specs can be probed for negative densities.
    """
    spec = kernels.resolve(spec)
    d = spec.d
    if z < 0:
        raise DomainError("frequency z must be >= 0")
    if z == 0.0:
        weight = 2.0 ** (1 - d) / (math.pi ** (d / 2.0) * math.gamma(d / 2.0))
        total, err = _radial_moment(spec, d, quad_tol=abs_tol * 1e-2)
        if err * weight > abs_tol:
            raise AccuracyError(f"quadrature error {err * weight:g} above {abs_tol:g}")
        return weight * total

    order = d / 2.0 - 1.0
    pref = z ** (1.0 - d / 2.0) / (2.0 * math.pi) ** (d / 2.0)

    def integrand(u):
        return u ** (d / 2.0) * jv(order, u * z) * kernels.correlation(spec, u, check=False)

    support = kernels.effective_support(spec, check=False)
    seg_tol = abs_tol / (50.0 * max(pref, 1e-6))
    if math.isfinite(support):
        knots = [0.0] + _bessel_zero_knots(order, z, support) + [support]
        total = 0.0
        err = 0.0
        for lo, hi in zip(knots[:-1], knots[1:]):
            v, e = quad(integrand, lo, hi, limit=200, epsabs=seg_tol, epsrel=1e-10)
            total += v
            err += e
        if err * pref > abs_tol:
            raise AccuracyError(f"quadrature error {err * pref:g} above {abs_tol:g}")
        return pref * total

    # Matern: head integral up to the first zero, then Euler-accelerated
    # alternating zero-to-zero segments.
    first = (1.0 + order / 2.0 - 0.25) * math.pi / z
    head, err = quad(integrand, 0.0, first, limit=400, epsabs=seg_tol, epsrel=1e-10)
    segments = []
    estimate = head
    stable = 0
    lo = first
    for k in range(2, 800):
        hi = (k + order / 2.0 - 0.25) * math.pi / z
        v, e = quad(integrand, lo, hi, limit=100, epsabs=seg_tol, epsrel=1e-10)
        err += e
        segments.append(v)
        lo = hi
        new_estimate = head + _euler_accelerated(segments)
        if abs(new_estimate - estimate) < 0.2 * abs_tol / max(pref, 1e-12):
            stable += 1
            if stable >= 3:
                estimate = new_estimate
                break
        else:
            stable = 0
        estimate = new_estimate
    else:
        raise AccuracyError("oscillatory tail did not stabilise within 800 segments")
    if err * pref > abs_tol:
        raise AccuracyError(f"quadrature error {err * pref:g} above {abs_tol:g}")
    return pref * estimate
