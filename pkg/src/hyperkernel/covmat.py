"""Point sets, covariance assembly (dense and sparse), Cholesky, simple kriging.

Sparse assembly bins points into cells whose edge equals the kernel support,
so only neighbouring cells are examined; the examined-pair counter backs the
sparsity/performance claims.  Sparse matrices are densified before
factorisation (desk-scale n keeps that tractable); assembly itself is where
compact support pays off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.linalg import solve_triangular
from scipy.linalg.lapack import dpotrf

from . import kernels
from .errors import DomainError, NotPositiveDefiniteError

__all__ = [
    "PointSet",
    "CovMatrix",
    "CholFactor",
    "pairwise_dist",
    "cross_dist",
    "assemble",
    "cholesky",
    "solve",
    "simple_krige",
]


@dataclass(frozen=True)
class PointSet:
    """n locations in R^d; coordinates must be finite."""

    coords: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.coords, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise DomainError("coords must be an (n, d) array with n >= 1")
        if not np.all(np.isfinite(arr)):
            raise DomainError("coordinates must be finite")
        object.__setattr__(self, "coords", arr)

    @property
    def n(self):
        return self.coords.shape[0]

    @property
    def dim(self):
        return self.coords.shape[1]


def cross_dist(a, b, block=1024):
    """Euclidean distances between the rows of a and of b.

    Accumulates squared differences coordinate by coordinate so that the dense
    matrix path and the per-pair sparse path produce bit-identical values.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.empty((a.shape[0], b.shape[0]))
    for start in range(0, a.shape[0], block):
        stop = min(start + block, a.shape[0])
        acc = np.zeros((stop - start, b.shape[0]))
        for k in range(a.shape[1]):
            diff = a[start:stop, k, None] - b[None, :, k]
            acc += diff * diff
        out[start:stop] = np.sqrt(acc)
    return out


def pairwise_dist(points):
    """Symmetric Euclidean distance matrix of a point set (zero diagonal)."""
    c = points.coords
    d = cross_dist(c, c)
    np.fill_diagonal(d, 0.0)
    return d


@dataclass(frozen=True)
class CovMatrix:
    """Covariance matrix sigma2 * phi(dist) + nugget * I, dense or CSR."""

    n: int
    sigma2: float
    nugget: float
    storage: str  # "dense" | "csr"
    pct_zero: float
    pairs_examined: int
    dense: np.ndarray | None = None
    row_ptr: np.ndarray | None = None
    col_idx: np.ndarray | None = None
    values: np.ndarray | None = None

    def to_dense(self):
        if self.storage == "dense":
            return self.dense
        out = np.zeros((self.n, self.n))
        for i in range(self.n):
            cols = self.col_idx[self.row_ptr[i] : self.row_ptr[i + 1]]
            vals = self.values[self.row_ptr[i] : self.row_ptr[i + 1]]
            out[i, cols] = vals
        return out


def _csr_from_pairs(n, diag_value, rows, cols, vals):
    """Build symmetric CSR storage from the strictly-upper pair list."""
    all_rows = np.concatenate([rows, cols, np.arange(n)])
    all_cols = np.concatenate([cols, rows, np.arange(n)])
    all_vals = np.concatenate([vals, vals, np.full(n, diag_value)])
    order = np.lexsort((all_cols, all_rows))
    all_rows = all_rows[order]
    all_cols = all_cols[order]
    all_vals = all_vals[order]
    row_ptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(row_ptr, all_rows + 1, 1)
    row_ptr = np.cumsum(row_ptr)
    return row_ptr, all_cols.astype(np.int64), all_vals


def assemble(spec, sigma2, nugget, points, storage="dense", accuracy=None):
    """Covariance matrix of a valid spec over a point set.

    CSR storage keeps only within-support entries plus the diagonal;
    ``pct_zero`` is always the percentage of exact zeros out of all n^2
    entries, and ``pairs_examined`` counts the distance evaluations performed.
    """
    if storage not in ("dense", "csr"):
        raise DomainError(f"storage must be 'dense' or 'csr', got {storage!r}")
    if sigma2 <= 0:
        raise DomainError("sigma2 must be > 0")
    if nugget < 0:
        raise DomainError("nugget must be >= 0")
    kernels._require_valid(spec)
    spec = kernels.resolve(spec)
    kwargs = {} if accuracy is None else {"accuracy": accuracy}
    support = kernels.effective_support(spec, check=False)
    coords = points.coords
    n = points.n

    if storage == "dense":
        dist = pairwise_dist(points)
        inside = dist < support
        mat = np.zeros((n, n))
        mat[inside] = sigma2 * kernels.correlation(spec, dist[inside], check=False, **kwargs)
        mat[np.diag_indices(n)] = sigma2 + nugget
        pct_zero = 100.0 * float(np.count_nonzero(mat == 0.0)) / float(n * n)
        return CovMatrix(n, sigma2, nugget, "dense", pct_zero, n * n, dense=mat)

    edge = support
    if not math.isfinite(edge):
        span = coords.max(axis=0) - coords.min(axis=0)
        edge = float(np.max(span)) + 1.0 if n > 1 else 1.0
    cells = {}
    keys = np.floor(coords / edge).astype(np.int64)
    for i, key in enumerate(map(tuple, keys)):
        cells.setdefault(key, []).append(i)
    offsets = list(product((-1, 0, 1), repeat=points.dim))
    rows, cols, dists = [], [], []
    examined = 0
    for key, members in cells.items():
        neigh = []
        for off in offsets:
            other = tuple(k + o for k, o in zip(key, off))
            neigh.extend(cells.get(other, ()))
        neigh = np.array(sorted(neigh), dtype=np.int64)
        for i in members:
            cand = neigh[neigh > i]
            if cand.size == 0:
                continue
            examined += int(cand.size)
            acc = np.zeros(cand.size)
            for k in range(points.dim):
                diff = coords[i, k] - coords[cand, k]
                acc += diff * diff
            dij = np.sqrt(acc)
            keep = dij < support
            if keep.any():
                rows.extend([i] * int(keep.sum()))
                cols.extend(cand[keep].tolist())
                dists.extend(dij[keep].tolist())
    rows = np.array(rows, dtype=np.int64)
    cols = np.array(cols, dtype=np.int64)
    dists = np.array(dists)
    vals = (
        sigma2 * kernels.correlation(spec, dists, check=False, **kwargs)
        if dists.size
        else np.zeros(0)
    )
    row_ptr, col_idx, values = _csr_from_pairs(n, sigma2 + nugget, rows, cols, vals)
    nonzero = int(np.count_nonzero(values))
    pct_zero = 100.0 * float(n * n - nonzero) / float(n * n)
    return CovMatrix(
        n,
        sigma2,
        nugget,
        "csr",
        pct_zero,
        examined,
        row_ptr=row_ptr,
        col_idx=col_idx,
        values=values,
    )


@dataclass(frozen=True)
class CholFactor:
    """Lower-triangular Cholesky factor with its log determinant."""

    lower: np.ndarray
    log_det: float

    @property
    def n(self):
        return self.lower.shape[0]


def _cholesky_array(mat, overwrite=False, clean=True):
    """dpotrf wrapper returning (lower factor, log determinant).

    With clean=False the strict upper triangle keeps whatever dpotrf left
    there; that is fine for triangular solves, which only read the lower part.
    """
    c, info = dpotrf(mat, lower=1, overwrite_a=1 if overwrite else 0)
    if info > 0:
        raise NotPositiveDefiniteError(pivot=int(info) - 1)
    if info < 0:
        raise DomainError(f"illegal value in Cholesky argument {-int(info)}")
    log_det = 2.0 * float(np.sum(np.log(np.diag(c))))
    lower = np.tril(c) if clean else c
    return lower, log_det


def cholesky(m):
    """Cholesky factor of a CovMatrix (CSR input is densified first).

    Densification costs 8 n^2 bytes (n = 5000 is ~200 MB); sparsity pays off
    in assembly, not factorisation, at this scale.  Raises
    NotPositiveDefiniteError naming the failing pivot; no jitter is ever
    applied.
    """
    mat = m.to_dense() if isinstance(m, CovMatrix) else np.asarray(m, dtype=float)
    lower, log_det = _cholesky_array(mat)
    return CholFactor(lower, log_det)


def solve(factor, rhs):
    """Solve (L L^T) x = rhs for one or many right-hand sides."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != factor.n:
        raise DomainError(f"rhs has leading dimension {rhs.shape[0]}, expected {factor.n}")
    y = solve_triangular(factor.lower, rhs, lower=True, check_finite=False)
    return solve_triangular(factor.lower, y, lower=True, trans=1, check_finite=False)


def simple_krige(spec, sigma2, nugget, data_points, data_values, targets):
    """Best linear predictor under a known zero mean, with plug-in covariance.

    Returns (predictions, variances) at the target locations.
    """
    values = np.asarray(data_values, dtype=float)
    if values.shape[0] != data_points.n:
        raise DomainError("data_values length must match data_points")
    cov = assemble(spec, sigma2, nugget, data_points, storage="dense")
    factor = cholesky(cov)
    weights_rhs = solve(factor, values)
    rspec = kernels.resolve(spec)
    support = kernels.effective_support(rspec, check=False)
    dist = cross_dist(targets.coords, data_points.coords)
    cross = np.zeros_like(dist)
    inside = dist < support
    if inside.any():
        cross[inside] = sigma2 * kernels.correlation(rspec, dist[inside], check=False)
    predictions = cross @ weights_rhs
    inv_cross = solve(factor, cross.T)
    variances = sigma2 + nugget - np.einsum("ij,ji->i", cross, inv_cross)
    return predictions, variances
