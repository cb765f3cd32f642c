"""Gaussian likelihood, profile likelihood, ML fitting and standard errors.

The variance parameter always has a closed-form maximiser given the
correlation parameters (quadratic form over n), so fitting profiles it out
exactly and runs derivative-free Nelder-Mead over the log-transformed
remaining free parameters, multi-started from a Latin hypercube.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import minimize
from scipy.stats import qmc

from . import covmat, kernels
from .errors import DomainError, FitError, HyperkernelError

__all__ = [
    "FitConfig",
    "FitResult",
    "loglik",
    "sigma2_hat",
    "profile_loglik",
    "fit",
    "microergodic",
    "std_errors",
]

_LOG_2PI = math.log(2.0 * math.pi)

PARAM_NAMES = ("sigma2", "support_or_scale", "mu", "kappa", "nugget")

_FIELD_MAP = {
    kernels.Matern: {"support_or_scale": "alpha", "kappa": "nu"},
    kernels.GeneralizedWendland: {"support_or_scale": "beta", "mu": "mu", "kappa": "kappa"},
    kernels.GaussHypergeometric: {"support_or_scale": "a"},
    kernels.Hypergeometric: {"support_or_scale": "a", "mu": "mu", "kappa": "kappa"},
    kernels.HypergeometricBSupport: {"support_or_scale": "alpha", "mu": "mu", "kappa": "kappa"},
    kernels.HypergeometricMuSupport: {"support_or_scale": "alpha", "mu": "mu", "kappa": "kappa"},
}

# kappa varies on the whole real line past -1/2; everything else is positive
# and optimised on the log scale.
_LOG_SCALE = ("sigma2", "support_or_scale", "mu", "nugget")


def _field_for(spec, name):
    mapping = _FIELD_MAP[type(spec)]
    if name not in mapping:
        raise DomainError(f"parameter {name!r} is not available on {type(spec).__name__}")
    return mapping[name]


def _spec_with(template, params):
    updates = {_field_for(template, k): v for k, v in params.items() if k not in ("sigma2", "nugget")}
    return dataclasses.replace(template, **updates) if updates else template


def _kappa_of(spec):
    spec = kernels.resolve(spec)
    if isinstance(spec, kernels.Matern):
        return spec.nu - 0.5
    if isinstance(spec, kernels.GaussHypergeometric):
        return spec.delta - (spec.d + 1) / 2.0
    return spec.kappa


def _scale_of(spec):
    return getattr(spec, _field_for(spec, "support_or_scale"))


def _corr_matrix(spec, dist, nugget_ratio, out=None):
    rspec = kernels.resolve(spec)
    support = kernels.effective_support(rspec, check=False)
    if out is None:
        mat = np.zeros_like(dist)
    else:
        mat = out
        mat.fill(0.0)
    inside = dist < support
    if inside.any():
        mat[inside] = kernels.correlation(rspec, dist[inside], check=False)
    np.fill_diagonal(mat, 1.0 + nugget_ratio)
    return mat


def _chol_pieces(spec, dist, z, nugget_ratio, work=None):
    """(quadratic form z' R~^-1 z, log|R~|) via Cholesky."""
    mat = _corr_matrix(spec, dist, nugget_ratio, out=work)
    lower, log_det = covmat._cholesky_array(mat, overwrite=work is not None, clean=False)
    y = solve_triangular(lower, z, lower=True, check_finite=False)
    return float(y @ y), log_det


def loglik(spec, sigma2, nugget, points, values):
    """Gaussian log-likelihood of zero-mean data under sigma2 * phi + nugget."""
    if sigma2 <= 0:
        raise DomainError("sigma2 must be > 0")
    if nugget < 0:
        raise DomainError("nugget must be >= 0")
    kernels._require_valid(spec)
    z = np.asarray(values, dtype=float)
    n = points.n
    if z.shape != (n,):
        raise DomainError(f"values must have shape ({n},)")
    dist = covmat.pairwise_dist(points)
    quadform, log_det = _chol_pieces(spec, dist, z, nugget / sigma2)
    return -0.5 * (n * (_LOG_2PI + math.log(sigma2)) + log_det + quadform / sigma2)


def sigma2_hat(spec, points, values, nugget_ratio=0.0):
    """Closed-form variance maximiser z' R^-1 z / n at fixed correlation."""
    kernels._require_valid(spec)
    z = np.asarray(values, dtype=float)
    dist = covmat.pairwise_dist(points)
    quadform, _ = _chol_pieces(spec, dist, z, nugget_ratio)
    return quadform / points.n


def profile_loglik(spec, points, values, nugget_ratio=0.0):
    """Profile log-likelihood with the variance replaced by its maximiser.

    Evaluated exactly as printed: -(1/2) (log 2 pi + n log s2_hat + log|R| + n);
    its level differs from loglik(s2_hat, .) by the constant
    (n - 1)/2 * log 2 pi, the argmax over correlation parameters is identical.
    """
    kernels._require_valid(spec)
    z = np.asarray(values, dtype=float)
    n = points.n
    dist = covmat.pairwise_dist(points)
    quadform, log_det = _chol_pieces(spec, dist, z, nugget_ratio)
    s2 = quadform / n
    return -0.5 * (_LOG_2PI + n * math.log(s2) + log_det + n)


def microergodic(sigma2, a, kappa):
    """Fixed-shape microergodic parameter sigma2 / a^(2 kappa + 1)."""
    if a <= 0:
        raise DomainError("a must be > 0")
    return sigma2 / a ** (2.0 * kappa + 1.0)


@dataclass(frozen=True)
class FitConfig:
    """Free-parameter set, bounds, fixed values and optimizer budget.

    ``free_params`` is a subset of ``PARAM_NAMES``; values for the non-free
    correlation parameters come from the spec template handed to ``fit``,
    while fixed sigma2/nugget live here.  A free nugget is optimised as the
    ratio nugget/sigma2 (its natural likelihood parameterisation); estimates
    are reported on the absolute scale.
    """

    free_params: tuple
    bounds: dict
    sigma2: float = 1.0
    nugget: float = 0.0
    restarts: int = 5
    tolerance: float = 1e-6
    max_iter: int = 400
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "free_params", tuple(self.free_params))
        for name in self.free_params:
            if name not in PARAM_NAMES:
                raise DomainError(f"unknown free parameter {name!r}")
        if self.restarts < 1:
            raise DomainError("restarts must be >= 1")
        if self.sigma2 <= 0:
            raise DomainError("sigma2 must be > 0")
        if self.nugget < 0:
            raise DomainError("nugget must be >= 0")
        if "support_or_scale" in self.free_params:
            lo, hi = self.bounds.get("support_or_scale", (0.0, math.inf))
            if not (0.0 < lo < hi < math.inf):
                raise DomainError("support bounds must satisfy 0 < lo < hi < inf")


@dataclass(frozen=True)
class FitResult:
    estimates: dict
    microergodic: float
    loglik: float
    std_errors: dict | None
    converged: bool
    n_evals: int
    spec: object


def _transform(name, value):
    return math.log(value) if name in _LOG_SCALE else value


def _untransform(name, value):
    return math.exp(value) if name in _LOG_SCALE else value


def fit(config, spec_template, points, values):
    """Maximum-likelihood fit of the free parameters.

    sigma2, when free, is profiled out in closed form; the remaining free
    parameters are maximised by Nelder-Mead in log-transformed coordinates
    (identity for kappa) from ``restarts`` Latin-hypercube starting points.
    The support estimate is clamped to its bound interval.  Deterministic for
    a fixed config seed.
    """
    z = np.asarray(values, dtype=float)
    n = points.n
    free = tuple(dict.fromkeys(config.free_params))
    if z.shape != (n,):
        raise DomainError(f"values must have shape ({n},)")
    if n < len(free) + 1:
        raise DomainError(f"need at least {len(free) + 1} observations for {len(free)} free parameters")

    profile_sigma2 = "sigma2" in free
    nugget_free = "nugget" in free
    if profile_sigma2 and not nugget_free and config.nugget > 0:
        raise DomainError(
            "a fixed nonzero nugget with free sigma2 is unsupported; free the nugget instead"
        )
    opt_names = [p for p in free if p != "sigma2"]

    for name in opt_names:
        if name not in config.bounds:
            raise DomainError(f"missing bounds for free parameter {name!r}")
        lo, hi = config.bounds[name]
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise DomainError(f"bounds for {name!r} must be finite with lo < hi")
        if name in _LOG_SCALE and lo <= 0:
            raise DomainError(f"bounds for {name!r} must be positive")

    dist = covmat.pairwise_dist(points)
    work = np.empty_like(dist)
    evals = [0]
    failures = [0]
    last_error = [None]

    def evaluate(params):
        """-> (loglik, sigma2_used, nugget_used) at a full parameter dict."""
        spec = _spec_with(spec_template, params)
        if not kernels.validate(spec).valid:
            raise DomainError("invalid correlation parameters")
        if nugget_free:
            ratio = params["nugget_ratio"]
        else:
            base_sigma2 = params.get("sigma2", config.sigma2)
            ratio = config.nugget / base_sigma2
        quadform, log_det = _chol_pieces(spec, dist, z, ratio, work=work)
        if profile_sigma2:
            s2 = quadform / n
            if not s2 > 0:
                raise DomainError("degenerate profiled variance")
        else:
            s2 = params.get("sigma2", config.sigma2)
        ll = -0.5 * (n * (_LOG_2PI + math.log(s2)) + log_det + quadform / s2)
        nug = ratio * s2 if nugget_free else config.nugget
        return ll, s2, nug

    def pack(theta):
        params = {}
        for name, t in zip(opt_names, theta):
            lo_t, hi_t = bounds_t[name]
            t = min(max(t, lo_t), hi_t)
            key = "nugget_ratio" if name == "nugget" else name
            params[key] = _untransform(name, t)
        return params

    if not opt_names:
        kernels._require_valid(spec_template)
        if profile_sigma2:
            quadform, log_det = _chol_pieces(spec_template, dist, z, 0.0)
            s2 = quadform / n
            ll = -0.5 * (n * (_LOG_2PI + math.log(s2)) + log_det + quadform / s2)
        else:
            s2 = config.sigma2
            ll = loglik(spec_template, s2, config.nugget, points, values)
        spec = spec_template
        estimates = _estimates_dict(spec, s2, config.nugget)
        return FitResult(
            estimates,
            microergodic(s2, estimates["support_or_scale"], estimates["kappa"]),
            ll,
            None,
            True,
            1,
            spec,
        )

    bounds_t = {
        name: (_transform(name, config.bounds[name][0]), _transform(name, config.bounds[name][1]))
        for name in opt_names
    }

    sampler = qmc.LatinHypercube(d=len(opt_names), seed=config.seed)
    unit = sampler.random(config.restarts)
    lo_vec = np.array([bounds_t[nm][0] for nm in opt_names])
    hi_vec = np.array([bounds_t[nm][1] for nm in opt_names])
    starts = lo_vec + unit * (hi_vec - lo_vec)

    def objective(theta):
        evals[0] += 1
        try:
            ll, _, _ = evaluate(pack(theta))
        except HyperkernelError as exc:
            failures[0] += 1
            last_error[0] = exc
            return math.inf
        return -ll

    best = None
    for x0 in starts:
        res = minimize(
            objective,
            x0,
            method="Nelder-Mead",
            options={
                "xatol": config.tolerance,
                "fatol": config.tolerance,
                "maxiter": config.max_iter * max(1, len(opt_names)),
            },
        )
        if not math.isfinite(res.fun):
            continue
        params = pack(res.x)
        support_est = params.get("support_or_scale", math.inf)
        cand = (-res.fun, -support_est, params, bool(res.success))
        if best is None or (cand[0], cand[1]) > (best[0], best[1]):
            best = cand
    if best is None:
        raise FitError(
            f"all {config.restarts} restarts failed ({failures[0]} factorisation/validity "
            f"failures; last: {last_error[0]})"
        )

    ll_best, _, params, success = best
    ll, s2, nug = evaluate(params)
    spec = _spec_with(spec_template, params)
    estimates = _estimates_dict(spec, s2, nug)
    return FitResult(
        estimates,
        microergodic(s2, estimates["support_or_scale"], estimates["kappa"]),
        ll,
        None,
        success,
        evals[0],
        spec,
    )


def _estimates_dict(spec, sigma2, nugget):
    rspec = kernels.resolve(spec)
    est = {
        "sigma2": sigma2,
        "support_or_scale": _scale_of(spec),
        "kappa": _kappa_of(rspec),
        "nugget": nugget,
    }
    if hasattr(rspec, "mu"):
        est["mu"] = rspec.mu
    elif isinstance(rspec, kernels.Matern):
        est["mu"] = math.inf
    return est


def std_errors(spec, sigma2, points, values, free_params, nugget=0.0, rel_step=1e-4):
    """Standard errors from the finite-difference observed information.

    Central differences of the negative log-likelihood on the transformed
    scale (log for positive parameters), inverted and mapped back through the
    delta method.  Raises on a singular or non-positive Hessian.
    """
    free = tuple(dict.fromkeys(free_params))
    for name in free:
        if name not in PARAM_NAMES:
            raise DomainError(f"unknown parameter {name!r}")
    current = {
        "sigma2": sigma2,
        "nugget": nugget,
    }
    rspec = kernels.resolve(spec)
    for name in free:
        if name in ("sigma2", "nugget"):
            continue
        current[name] = getattr(rspec, _field_for(rspec, name))
    theta0 = np.array([_transform(nm, current[nm]) for nm in free])

    z = np.asarray(values, dtype=float)
    dist = covmat.pairwise_dist(points)
    n = points.n

    def neg_ll(theta):
        params = {nm: _untransform(nm, t) for nm, t in zip(free, theta)}
        s2 = params.get("sigma2", sigma2)
        nug = params.get("nugget", nugget)
        spec_t = _spec_with(rspec, {k: v for k, v in params.items() if k not in ("sigma2", "nugget")})
        if not kernels.validate(spec_t).valid:
            raise DomainError("invalid parameters in Hessian stencil")
        quadform, log_det = _chol_pieces(spec_t, dist, z, nug / s2)
        return 0.5 * (n * (_LOG_2PI + math.log(s2)) + log_det + quadform / s2)

    k = len(free)
    steps = rel_step * np.maximum(1.0, np.abs(theta0))
    hess = np.empty((k, k))
    f0 = neg_ll(theta0)
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = steps[i]
        fp = neg_ll(theta0 + ei)
        fm = neg_ll(theta0 - ei)
        hess[i, i] = (fp - 2.0 * f0 + fm) / steps[i] ** 2
        for j in range(i + 1, k):
            ej = np.zeros(k)
            ej[j] = steps[j]
            fpp = neg_ll(theta0 + ei + ej)
            fpm = neg_ll(theta0 + ei - ej)
            fmp = neg_ll(theta0 - ei + ej)
            fmm = neg_ll(theta0 - ei - ej)
            hess[i, j] = hess[j, i] = (fpp - fpm - fmp + fmm) / (4.0 * steps[i] * steps[j])
    try:
        cov = np.linalg.inv(hess)
    except np.linalg.LinAlgError as exc:
        raise DomainError(f"singular Hessian: {exc}") from exc
    diag = np.diag(cov)
    if not np.all(np.isfinite(diag)) or np.any(diag <= 0):
        raise DomainError("Hessian is not positive definite at the estimates")
    out = {}
    for i, name in enumerate(free):
        se_t = math.sqrt(diag[i])
        out[name] = se_t * current[name] if name in _LOG_SCALE else se_t
    return out
