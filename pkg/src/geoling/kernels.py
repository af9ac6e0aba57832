"""Kernel functions, Gram matrices and low-rank Gram factors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial.distance import pdist

from .geometry import PointSet, distance_matrix, haversine_km, median_distance
from .lingdata import ObservationColumn


@dataclass(frozen=True)
class KernelSpec:
    kind: str  # "rbf" or "delta"
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in ("rbf", "delta"):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.kind == "rbf" and not (self.gamma is not None and np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError("rbf kernel needs a finite gamma > 0")


@dataclass(frozen=True)
class LowRankGram:
    """Factor ``G`` (``n x r``) with ``K ~= G @ G.T``.

    ``residual`` is the trace of ``K - G G^T`` left when the factorization
    stopped and ``pivots`` the indices chosen, in order.
    """

    factor: np.ndarray
    pivots: tuple
    residual: float
    tol: float

    @property
    def n(self) -> int:
        return self.factor.shape[0]

    @property
    def rank(self) -> int:
        return self.factor.shape[1]


def rbf(d2, gamma):
    """Gaussian RBF similarity ``exp(-gamma * d2)`` of squared distances."""
    return np.exp(-gamma * np.asarray(d2, dtype=float))


def gram_geo(ps: PointSet, gamma: float) -> np.ndarray:
    KernelSpec("rbf", gamma)
    d = distance_matrix(ps)
    return rbf(d * d, gamma)


def gram_delta(col: ObservationColumn) -> np.ndarray:
    if not col.discrete:
        raise ValueError("the delta kernel needs binary or categorical values")
    v = col.values
    return (v[:, None] == v[None, :]).astype(float)


def _sq_dists(values):
    diff = values[:, None, :] - values[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def gram_freq(col: ObservationColumn, gamma: float) -> np.ndarray:
    if col.shape != "frequency":
        raise ValueError("gram_freq needs a frequency column")
    KernelSpec("rbf", gamma)
    return rbf(_sq_dists(col.values), gamma)


def median_bandwidth(data) -> float:
    """Median heuristic ``gamma = 1 / median_distance**2``.

    ``data`` is a :class:`PointSet` or a frequency :class:`ObservationColumn`
    (Euclidean distances between frequency vectors).
    """
    if isinstance(data, PointSet):
        med = median_distance(data)
    elif isinstance(data, ObservationColumn) and data.shape == "frequency":
        med = float(np.median(pdist(data.values)))
    else:
        raise TypeError("median_bandwidth takes a PointSet or a frequency column")
    if med <= 0:
        raise ValueError("median pairwise distance is zero; the median heuristic is undefined")
    return 1.0 / med**2


def default_lowrank_tol(n: int) -> float:
    return 1e-8 * n


def incomplete_cholesky(
    column: Callable[[int], np.ndarray],
    diagonal: np.ndarray,
    tol: float,
    max_rank: int | None = None,
) -> LowRankGram:
    """Greedy pivoted Cholesky factorization of a PSD matrix given lazily.

    ``column(j)`` returns column ``j`` of ``K`` and ``diagonal`` its diagonal.
    Each step pivots on the largest remaining diagonal residual (first index
    on ties) and stops once the summed residual is at most ``tol``.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    d = np.array(diagonal, dtype=float)
    n = d.shape[0]
    max_rank = n if max_rank is None else min(max_rank, n)
    scale = max(float(np.abs(d).max(initial=0.0)), 1.0)
    # residuals at this level are rounding noise, so pivoting on them only amplifies error
    noise = 64 * n * np.finfo(float).eps * scale
    if d.min(initial=0.0) < -1e-8 * scale:
        raise ValueError("negative diagonal entry; the kernel is not positive semi-definite")
    d = np.maximum(d, 0.0)
    G = np.zeros((n, max_rank))
    pivots: list[int] = []
    for r in range(max_rank):
        if d.sum() <= tol:
            break
        j = int(np.argmax(d))
        pivot = d[j]
        if pivot <= noise:
            break
        g = np.asarray(column(j), dtype=float) - G[:, :r] @ G[j, :r]
        g /= np.sqrt(pivot)
        G[:, r] = g
        d -= g * g
        d[j] = 0.0
        if d.min() < -1e-8 * scale:
            raise ValueError(
                f"pivot residual {d.min():.3g} is negative; the kernel is not positive semi-definite"
            )
        d = np.maximum(d, 0.0)
        pivots.append(j)
    r = len(pivots)
    return LowRankGram(G[:, :r].copy(), tuple(pivots), float(d.sum()), float(tol))


def lowrank_dense(K: np.ndarray, tol: float, max_rank: int | None = None) -> LowRankGram:
    """Incomplete Cholesky of an explicit matrix (mainly for testing)."""
    K = np.asarray(K, dtype=float)
    return incomplete_cholesky(lambda j: K[:, j], np.diag(K), tol, max_rank)


def lowrank_geo(ps: PointSet, gamma: float, tol: float | None = None) -> LowRankGram:
    """Low-rank RBF Gram over locations without forming the ``n x n`` matrix."""
    KernelSpec("rbf", gamma)
    n = len(ps)
    tol = default_lowrank_tol(n) if tol is None else tol
    coords = ps.coords
    if ps.metric == "euclidean":
        def column(j):
            diff = coords - coords[j]
            return rbf(np.einsum("ij,ij->i", diff, diff), gamma)
    else:
        def column(j):
            d = haversine_km(coords, coords[j])
            return rbf(d * d, gamma)
    return incomplete_cholesky(column, np.ones(n), tol)


def lowrank_column(col: ObservationColumn, gamma: float | None = None, tol: float | None = None) -> LowRankGram:
    """Low-rank Gram on observations: delta kernel for discrete, RBF for frequency."""
    n = len(col)
    tol = default_lowrank_tol(n) if tol is None else tol
    if col.discrete:
        v = col.values
        return incomplete_cholesky(lambda j: (v == v[j]).astype(float), np.ones(n), tol)
    if gamma is None:
        raise ValueError("frequency columns need an RBF gamma")
    KernelSpec("rbf", gamma)
    vals = col.values

    def column(j):
        diff = vals - vals[j]
        return rbf(np.einsum("ij,ij->i", diff, diff), gamma)

    return incomplete_cholesky(column, np.ones(n), tol)
