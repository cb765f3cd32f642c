"""Random-field simulation, perturbed grids, semivariograms, Monte Carlo studies.

Randomness policy: every operation takes an explicit seed, drives a
counter-based Philox generator, splits one SeedSequence child per replicate
(so replicates are independent and order-insensitive), and maps uniforms
through the inverse normal CDF.  Same seed, same numbers, on any platform or
worker count.
"""

from __future__ import annotations

import dataclasses
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from . import covmat, kernels, mle
from .errors import DomainError, HyperkernelError

__all__ = [
    "GridDesign",
    "McStudyConfig",
    "McStudyRow",
    "McStudyReport",
    "perturbed_grid",
    "simulate_gaussian",
    "tukey_h",
    "empirical_semivariogram",
    "run_mc_study",
    "worker_count",
]


def worker_count(requested=None):
    """Worker cap: requested count bounded by HYPERKERNEL_THREADS and the CPUs."""
    count = requested if requested is not None else (os.cpu_count() or 1)
    env = os.environ.get("HYPERKERNEL_THREADS")
    if env:
        count = min(count, int(env))
    return max(1, int(count))


@dataclass(frozen=True)
class GridDesign:
    """Regular grid plus an optional uniform jitter of each coordinate."""

    increments: float
    bounds: tuple
    perturbation_halfwidth: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "bounds", tuple(tuple(b) for b in self.bounds))
        if self.increments <= 0:
            raise DomainError("increments must be > 0")
        for lo, hi in self.bounds:
            if not hi > lo:
                raise DomainError("each axis needs lo < hi")
            steps = (hi - lo) / self.increments
            if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
                raise DomainError(
                    f"increments {self.increments} do not divide [{lo}, {hi}]"
                )
        if not 0.0 <= self.perturbation_halfwidth < self.increments / 2.0:
            raise DomainError("perturbation_halfwidth must lie in [0, increments/2)")

    @property
    def axis_counts(self):
        return tuple(int(round((hi - lo) / self.increments)) + 1 for lo, hi in self.bounds)


def perturbed_grid(design):
    """Regular grid on the box, each coordinate jittered uniformly; seeded."""
    axes = [
        np.linspace(lo, hi, count)
        for (lo, hi), count in zip(design.bounds, design.axis_counts)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([m.ravel() for m in mesh], axis=1)
    if design.perturbation_halfwidth > 0:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(design.seed)))
        jitter = (2.0 * rng.random(coords.shape) - 1.0) * design.perturbation_halfwidth
        coords = coords + jitter
    return covmat.PointSet(coords)


def _standard_normals(n, seed_seq):
    g = np.random.Generator(np.random.Philox(seed_seq))
    u = g.random(n)
    return ndtri(np.maximum(u, 1e-300))


def simulate_gaussian(spec, sigma2, nugget, points, n_reps, seed):
    """n_reps zero-mean Gaussian field draws via Cholesky; (n, n_reps) array."""
    if n_reps < 1:
        raise DomainError("n_reps must be >= 1")
    cov = covmat.assemble(spec, sigma2, nugget, points, storage="dense")
    factor = covmat.cholesky(cov)
    children = np.random.SeedSequence(seed).spawn(n_reps)
    eps = np.empty((points.n, n_reps))
    for j, child in enumerate(children):
        eps[:, j] = _standard_normals(points.n, child)
    return factor.lower @ eps


def tukey_h(values, sigma, h):
    """Heavy-tail transform sigma * z * exp(h z^2 / 2) of standard-normal values."""
    if not 0.0 <= h < 0.5:
        raise DomainError(f"h must lie in [0, 1/2), got {h}")
    if sigma <= 0:
        raise DomainError("sigma must be > 0")
    z = np.asarray(values, dtype=float)
    return sigma * z * np.exp(h * z * z / 2.0)


def empirical_semivariogram(points, values, n_bins, max_dist):
    """Matheron estimator over equal-width distance bins.

    Returns (bin_centers, gamma_hat, counts); empty bins carry count 0 and a
    NaN gamma_hat.
    """
    if points.n < 2:
        raise DomainError("need at least two points")
    if n_bins < 1 or max_dist <= 0:
        raise DomainError("n_bins must be >= 1 and max_dist > 0")
    z = np.asarray(values, dtype=float)
    dist = covmat.pairwise_dist(points)
    iu = np.triu_indices(points.n, k=1)
    d = dist[iu]
    sq = (z[iu[0]] - z[iu[1]]) ** 2
    edges = np.linspace(0.0, max_dist, n_bins + 1)
    idx = np.digitize(d, edges) - 1
    keep = (idx >= 0) & (idx < n_bins)
    counts = np.bincount(idx[keep], minlength=n_bins)
    sums = np.bincount(idx[keep], weights=sq[keep], minlength=n_bins)
    with np.errstate(invalid="ignore", divide="ignore"):
        gamma = np.where(counts > 0, 0.5 * sums / np.maximum(counts, 1), np.nan)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return centers, gamma, counts


@dataclass(frozen=True)
class McStudyConfig:
    """One (kappa, mu, a) cell of the bias/sd study; kappa and mu stay fixed."""

    kappa: float
    mu: float
    a: float
    sigma2: float = 1.0
    support_bounds: tuple | None = None

    def resolved_bounds(self):
        if self.support_bounds is not None:
            return tuple(self.support_bounds)
        return (self.a / 4.0, 4.0 * self.a)


@dataclass(frozen=True)
class McStudyRow:
    kappa: float
    mu: float
    a: float
    bias_sigma2: float
    sd_sigma2: float
    bias_support: float
    sd_support: float
    bias_microergodic: float
    sd_microergodic: float
    n_used: int
    n_failed: int


@dataclass(frozen=True)
class McStudyReport:
    rows: tuple
    n_reps: int
    seed: int


def _replicate_chunk(payload):
    """Simulate + fit a chunk of replicates; runs in a worker process."""
    (lower, coords, kappa, mu, d, bounds, restarts, tolerance, keys) = payload
    points = covmat.PointSet(coords)
    template = kernels.Hypergeometric(kappa, mu, math.sqrt(bounds[0] * bounds[1]), d)
    n = coords.shape[0]
    out = []
    for sim_key, fit_key in keys:
        z = lower @ _standard_normals(n, sim_key)
        cfg = mle.FitConfig(
            free_params=("sigma2", "support_or_scale"),
            bounds={"support_or_scale": bounds},
            restarts=restarts,
            tolerance=tolerance,
            max_iter=200,
            seed=int(fit_key.generate_state(1)[0]),
        )
        try:
            res = mle.fit(cfg, template, points, z)
            out.append((res.estimates["sigma2"], res.estimates["support_or_scale"]))
        except HyperkernelError:
            out.append(None)
    return out


def run_mc_study(configs, design, n_reps, seed, restarts=2, tolerance=1e-5, threads=None):
    """Bias/standard-deviation table of (sigma2_hat, a_hat, microergodic).

    For each configuration the grid is perturbed once (config-indexed seed)
    and held fixed across replicates; kappa and mu are treated as known and
    (sigma2, a) are fitted per replicate.  Replicates run on per-replicate
    random streams and may be distributed over processes; failed fits are
    excluded and counted, never retried.
    """
    if n_reps < 1:
        raise DomainError("n_reps must be >= 1")
    configs = tuple(configs)
    if not configs:
        raise DomainError("need at least one configuration")
    d = len(design.bounds)
    master = np.random.SeedSequence(seed)
    config_children = master.spawn(len(configs))
    workers = worker_count(threads)

    rows = []
    for idx, config in enumerate(configs):
        spec_true = kernels.Hypergeometric(config.kappa, config.mu, config.a, d)
        kernels._require_valid(spec_true)
        points = perturbed_grid(dataclasses.replace(design, seed=design.seed + idx))
        cov = covmat.assemble(spec_true, config.sigma2, 0.0, points, storage="dense")
        lower = covmat.cholesky(cov).lower
        rep_children = config_children[idx].spawn(n_reps)
        keys = [tuple(child.spawn(2)) for child in rep_children]
        bounds = config.resolved_bounds()

        chunk_specs = []
        for i in range(workers):
            positions = list(range(i, n_reps, workers))
            if positions:
                chunk_specs.append((positions, [keys[p] for p in positions]))
        payloads = [
            (lower, points.coords, config.kappa, config.mu, d, bounds, restarts, tolerance, chunk)
            for _, chunk in chunk_specs
        ]
        if workers > 1 and len(payloads) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                chunk_results = list(pool.map(_replicate_chunk, payloads))
        else:
            chunk_results = [_replicate_chunk(p) for p in payloads]
        # restitch to replicate order so the report is worker-count independent
        results = [None] * n_reps
        for (positions, _), chunk_out in zip(chunk_specs, chunk_results):
            for pos, value in zip(positions, chunk_out):
                results[pos] = value

        kept = [r for r in results if r is not None]
        n_failed = n_reps - len(kept)
        if not kept:
            raise DomainError(f"all replicates failed for configuration {config!r}")
        s2 = np.array([r[0] for r in kept])
        a_hat = np.array([r[1] for r in kept])
        micro = s2 / a_hat ** (2.0 * config.kappa + 1.0)
        micro_true = config.sigma2 / config.a ** (2.0 * config.kappa + 1.0)
        rows.append(
            McStudyRow(
                config.kappa,
                config.mu,
                config.a,
                float(s2.mean() - config.sigma2),
                float(s2.std(ddof=1)) if len(kept) > 1 else 0.0,
                float(a_hat.mean() - config.a),
                float(a_hat.std(ddof=1)) if len(kept) > 1 else 0.0,
                float(micro.mean() - micro_true),
                float(micro.std(ddof=1)) if len(kept) > 1 else 0.0,
                len(kept),
                n_failed,
            )
        )
    return McStudyReport(tuple(rows), n_reps, seed)
