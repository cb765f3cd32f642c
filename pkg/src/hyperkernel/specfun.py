"""Special functions underlying the kernel families and spectral densities.

Everything here is a pure function of its arguments (plus an optional
``Accuracy`` budget), safe for unrestricted concurrent use.  Scalar inputs give
floats back; numpy arrays are evaluated elementwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, gammasgn, kv

from .errors import AccuracyError, DomainError

__all__ = [
    "Accuracy",
    "DEFAULT_ACCURACY",
    "log_gamma",
    "gauss_2f1",
    "gen_1f2",
    "bessel_k",
]

_LN2 = math.log(2.0)
_TINY = 1e-300


@dataclass(frozen=True)
class Accuracy:
    """Series evaluation budget: target relative tolerance and hard term cap."""

    rel_tol: float = 1e-12
    max_terms: int = 20000

    def __post_init__(self):
        if not 0.0 < self.rel_tol <= 1e-3:
            raise DomainError(f"rel_tol must be in (0, 1e-3], got {self.rel_tol}")
        if self.max_terms < 100:
            raise DomainError(f"max_terms must be >= 100, got {self.max_terms}")


DEFAULT_ACCURACY = Accuracy()


def log_gamma(x):
    """Natural log of the gamma function for x > 0."""
    if x <= 0.0:
        raise DomainError(f"log_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def log_gamma_product(numerators, denominators=()):
    """log|prod Gamma(n_i) / prod Gamma(d_j)| together with the product's sign."""
    logv = 0.0
    sign = 1.0
    for v in numerators:
        logv += gammaln(v)
        sign *= gammasgn(v)
    for v in denominators:
        logv -= gammaln(v)
        sign *= gammasgn(v)
    return logv, sign


def _is_nonpositive_integer(x, tol=1e-12):
    return x < 0.5 and abs(x - round(x)) < tol


def _series_2f1(a, b, c, w, acc):
    """Direct Gauss series on w in [0, ~0.55]; w is an ndarray.

    Coefficients are accumulated once with the truncation length decided at
    the largest argument present, then the polynomial is evaluated by Horner's
    rule.  The truncation depends on the multiset of arguments only through
    its maximum, so identical argument sets give bit-identical values
    regardless of how they are batched.
    """
    if _is_nonpositive_integer(c):
        raise DomainError(f"series parameter c={c} is a non-positive integer")
    wmax = float(np.max(w)) if w.size else 0.0
    coeffs = [1.0]
    scaled = 1.0  # c_n * wmax^n
    signed = 1.0  # series value at wmax, for the relative stop rule
    quiet = 0
    converged = False
    for n in range(acc.max_terms):
        ratio = (a + n) * (b + n) / ((c + n) * (n + 1.0))
        coeffs.append(coeffs[-1] * ratio)
        scaled *= ratio * wmax
        signed += scaled
        if abs(scaled) <= acc.rel_tol * max(abs(signed), _TINY):
            quiet += 1
            if quiet >= 2:
                converged = True
                break
        else:
            quiet = 0
    if not converged:
        raise AccuracyError(
            f"2F1 series did not converge within {acc.max_terms} terms "
            f"(a={a}, b={b}, c={c}, max w={wmax})"
        )
    out = np.full_like(w, coeffs[-1])
    for cn in coeffs[-2::-1]:
        out *= w
        out += cn
    return out


def _transform_2f1(a, b, c, v, acc):
    """Evaluate 2F1 at w = 1 - v via the linear transformation (A&S 15.3.6).

    Requires c - a - b away from the integers; the degenerate case is handled
    one level up by parameter perturbation.
    """
    s = c - a - b
    logv, sign = log_gamma_product((c, s), (c - a, c - b))
    coef1 = sign * math.exp(logv)
    logv, sign = log_gamma_product((c, -s), (a, b))
    coef2 = sign * math.exp(logv)
    f1 = _series_2f1(a, b, a + b - c + 1.0, v, acc)
    f2 = _series_2f1(c - a, c - b, s + 1.0, v, acc)
    return coef1 * f1 + coef2 * np.power(v, s) * f2


def _eval_2f1(a, b, c, w, acc):
    out = np.empty_like(w)
    lo = w <= 0.5
    if lo.any():
        out[lo] = _series_2f1(a, b, c, w[lo], acc)
    hi = ~lo
    if hi.any():
        out[hi] = _transform_2f1(a, b, c, 1.0 - w[hi], acc)
    return out


_DEGENERATE_TOL = 1e-6
_DEGENERATE_SHIFT = 1e-6


def gauss_2f1(a, b, c, w, accuracy=DEFAULT_ACCURACY):
    """Gauss hypergeometric 2F1(a, b; c; w) on w in [0, 1].

    Direct series below w = 0.5 and the 1-w linear transformation above it.
    When c - a - b sits within 1e-6 of an integer the transformation
    degenerates; the value is then taken as the average of evaluations at
    c +/- 1e-6, which removes the pole pair at the cost of ~1e-10 absolute
    error.  w = 1 is accepted when c - a - b > 0 (the Gauss limit).

    ``w`` may be a scalar or an ndarray of any shape.
    """
    arr = np.asarray(w, dtype=float)
    scalar = arr.ndim == 0
    if scalar:
        arr = arr.reshape(1)
    if _is_nonpositive_integer(c):
        raise DomainError(f"c must not be a non-positive integer, got c={c}")
    if arr.size:
        if float(arr.min()) < 0.0 or float(arr.max()) > 1.0:
            raise DomainError("gauss_2f1 argument w must lie in [0, 1]")
        s = c - a - b
        if float(arr.max()) == 1.0 and s <= 0:
            raise DomainError("w = 1 requires c - a - b > 0")
    s = c - a - b
    if abs(s - round(s)) < _DEGENERATE_TOL and bool(np.any(arr > 0.5)):
        res = 0.5 * (
            _eval_2f1(a, b, c + _DEGENERATE_SHIFT, arr, accuracy)
            + _eval_2f1(a, b, c - _DEGENERATE_SHIFT, arr, accuracy)
        )
    else:
        res = _eval_2f1(a, b, c, arr, accuracy)
    return float(res[0]) if scalar else res


def gen_1f2(a, b1, b2, x, accuracy=DEFAULT_ACCURACY):
    """Generalized hypergeometric 1F2(a; b1, b2; x) for x <= 0.

    Alternating series summed with Neumaier compensation.  When the largest
    term dwarfs the final sum (running magnitude beyond 1e15 of it, with the
    round-off floor above 1e-11) the result has no significant digits left in
    double precision and an ``AccuracyError`` is raised directing the caller
    to the spectral quadrature oracle; exact cancellations to zero stay below
    the floor and are returned as ~0.
    """
    for name, bv in (("b1", b1), ("b2", b2)):
        if _is_nonpositive_integer(bv):
            raise DomainError(f"{name} must not be a non-positive integer, got {bv}")
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    if scalar:
        arr = arr.reshape(1)
    if arr.size and float(arr.max()) > 0.0:
        raise DomainError("gen_1f2 argument x must be <= 0")
    term = np.ones_like(arr)
    total = np.ones_like(arr)
    comp = np.zeros_like(arr)
    peak = np.ones_like(arr)
    quiet = 0
    converged = False
    for n in range(accuracy.max_terms):
        term = term * ((a + n) / ((b1 + n) * (b2 + n) * (n + 1.0))) * arr
        new = total + term
        comp = comp + np.where(
            np.abs(total) >= np.abs(term), (total - new) + term, (term - new) + total
        )
        total = new
        np.maximum(peak, np.abs(term), out=peak)
        if np.all(np.abs(term) <= accuracy.rel_tol * np.maximum(np.abs(total + comp), _TINY)):
            quiet += 1
            if quiet >= 2:
                converged = True
                break
        else:
            quiet = 0
    if not converged:
        raise AccuracyError(
            f"1F2 series did not converge within {accuracy.max_terms} terms "
            f"(a={a}, b1={b1}, b2={b2})"
        )
    result = total + comp
    noise = peak * 1e-16
    bad = (peak > 1e15 * np.abs(result)) & (noise > 1e-11)
    if bool(np.any(bad)):
        worst = float(arr[bad].flat[0])
        raise AccuracyError(
            f"catastrophic cancellation in 1F2 at x={worst:g}: no significant digits "
            "remain in double precision; use the spectral quadrature oracle "
            "(hankel_spectral_quadrature) in this regime"
        )
    return float(result[0]) if scalar else result


def bessel_k(nu, x):
    """Modified Bessel function of the second kind K_nu(x), x > 0.

    Symmetric in nu (K_-nu = K_nu); delegated to scipy's kv.
    """
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    if arr.size and float(arr.min()) <= 0.0:
        raise DomainError("bessel_k requires x > 0")
    out = kv(nu, arr)
    return float(out) if scalar else out
