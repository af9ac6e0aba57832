"""Point sets, pairwise distances and spatial weighting matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.spatial import Delaunay, QhullError
from scipy.spatial.distance import pdist, squareform

EARTH_RADIUS_KM = 6371.0088

METRICS = ("euclidean", "haversine")


class GeoPoint(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class PointSet:
    """An ordered set of ``n >= 2`` locations and the metric used to compare them.

    ``coords`` is an ``(n, 2)`` array. Under ``"haversine"`` the columns are
    longitude and latitude in degrees and distances are great-circle km.
    """

    coords: np.ndarray
    metric: str = "euclidean"

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValueError(f"coords must have shape (n, 2), got {coords.shape}")
        if coords.shape[0] < 2:
            raise ValueError("a point set needs at least 2 points")
        if not np.all(np.isfinite(coords)):
            raise ValueError("coordinates must be finite")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}; expected one of {METRICS}")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @classmethod
    def from_points(cls, points, metric="euclidean"):
        return cls(np.asarray([tuple(p) for p in points], dtype=float), metric)

    def __len__(self):
        return self.coords.shape[0]

    def __getitem__(self, i) -> GeoPoint:
        x, y = self.coords[i]
        return GeoPoint(float(x), float(y))

    def take(self, index) -> "PointSet":
        return PointSet(self.coords[np.asarray(index)], self.metric)


@dataclass(frozen=True)
class SpatialWeights:
    """An ``n x n`` nonnegative weight matrix with zero diagonal.

    ``kind`` is one of ``threshold``, ``exponential``, ``knn`` or ``delaunay``;
    ``param`` holds tau, gamma or k (``None`` for Delaunay).
    """

    w: np.ndarray
    kind: str
    param: float | None = None
    normalized: bool = False
    info: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return self.w.shape[0]

    @property
    def total(self) -> float:
        return float(self.w.sum())

    @property
    def symmetric(self) -> bool:
        return bool(np.array_equal(self.w, self.w.T))

    def normalize(self) -> "SpatialWeights":
        """Rescale so that the weights sum to ``n``."""
        return SpatialWeights(_normalized(self.w), self.kind, self.param, True, self.info)


def _normalized(w):
    s = w.sum()
    if s <= 0:
        raise ValueError("cannot normalize an all-zero weight matrix")
    return w * (w.shape[0] / s)


def haversine_km(lonlat_a, lonlat_b):
    """Great-circle distance in km between broadcastable arrays of (lon, lat) degrees."""
    a = np.radians(np.asarray(lonlat_a, dtype=float))
    b = np.radians(np.asarray(lonlat_b, dtype=float))
    dlon = a[..., 0] - b[..., 0]
    dlat = a[..., 1] - b[..., 1]
    h = np.sin(dlat / 2) ** 2 + np.cos(a[..., 1]) * np.cos(b[..., 1]) * np.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def _haversine_km(coords):
    d = haversine_km(coords[:, None, :], coords[None, :, :])
    # the formula is symmetric in exact arithmetic only; enforce it
    d = np.triu(d, 1)
    return d + d.T


def distance_matrix(ps: PointSet) -> np.ndarray:
    """Symmetric ``n x n`` distance matrix of ``ps`` under its metric."""
    if ps.metric == "euclidean":
        return squareform(pdist(ps.coords))
    return _haversine_km(ps.coords)


def pairwise_distances(ps: PointSet) -> np.ndarray:
    """Condensed upper-triangle distances (length ``n(n-1)/2``)."""
    if ps.metric == "euclidean":
        return pdist(ps.coords)
    d = _haversine_km(ps.coords)
    return d[np.triu_indices(len(ps), 1)]


def median_distance(ps: PointSet, *, require_positive: bool = False) -> float:
    """Median of all pairwise distances.

    An even number of pairs takes the mean of the two middle values. With
    ``require_positive`` a degenerate set whose points all coincide raises.
    """
    med = float(np.median(pairwise_distances(ps)))
    if require_positive and med <= 0:
        raise ValueError("median pairwise distance is zero; cannot derive a bandwidth or cutoff")
    return med


def weights_threshold(dm: np.ndarray, tau: float, normalize: bool = False) -> SpatialWeights:
    """Binary weights ``w_ij = 1`` for ``d_ij < tau``, ``i != j``."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    w = (np.asarray(dm) < tau).astype(float)
    np.fill_diagonal(w, 0.0)
    if not w.any():
        raise ValueError(f"empty weights: no pair of points closer than tau={tau}")
    if normalize:
        w = _normalized(w)
    return SpatialWeights(w, "threshold", float(tau), normalize)


def weights_exponential(dm: np.ndarray, gamma: float, normalize: bool = False) -> SpatialWeights:
    """Continuous weights ``w_ij = exp(-gamma * d_ij)`` off the diagonal."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    w = np.exp(-gamma * np.asarray(dm, dtype=float))
    np.fill_diagonal(w, 0.0)
    if normalize:
        w = _normalized(w)
    return SpatialWeights(w, "exponential", float(gamma), normalize)


def weights_knn(dm: np.ndarray, k: int) -> SpatialWeights:
    """Row ``i`` marks the ``k`` nearest neighbours of ``i``; ties go to the lower index."""
    dm = np.asarray(dm, dtype=float)
    n = dm.shape[0]
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must be in [1, {n - 1}], got {k}")
    d = dm.copy()
    np.fill_diagonal(d, np.inf)
    order = np.argsort(d, axis=1, kind="stable")[:, :k]
    w = np.zeros((n, n))
    w[np.repeat(np.arange(n), k), order.ravel()] = 1.0
    return SpatialWeights(w, "knn", int(k), False)


def _all_collinear(sites):
    centered = sites - sites.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    return sv[1] <= 1e-12 * max(sv[0], 1e-300)


def delaunay_edges(ps: PointSet) -> SpatialWeights:
    """Binary weights along the edges of the planar Delaunay triangulation.

    Identical coordinates are merged into one site before triangulating;
    observations at the same site are linked to each other and share the
    site's edges. Longitude/latitude is treated as planar.
    """
    sites, site_of = np.unique(ps.coords, axis=0, return_inverse=True)
    site_of = site_of.ravel()
    if len(sites) < 3:
        raise ValueError("Delaunay triangulation needs at least 3 distinct locations")
    if _all_collinear(sites):
        raise ValueError("all distinct locations are collinear; triangulation is undefined")
    try:
        tri = Delaunay(sites)
    except QhullError as exc:
        raise ValueError(f"triangulation failed: {exc}") from None
    m = len(sites)
    adj = np.zeros((m, m), dtype=bool)
    s = tri.simplices
    for a, b in ((0, 1), (1, 2), (0, 2)):
        adj[s[:, a], s[:, b]] = True
        adj[s[:, b], s[:, a]] = True
    np.fill_diagonal(adj, True)
    if len(tri.coplanar):
        # sites Qhull dropped as numerically coincident join their nearest vertex
        alias = np.arange(m)
        alias[tri.coplanar[:, 0]] = tri.coplanar[:, 2]
        adj = adj[np.ix_(alias, alias)]
        site_of = alias[site_of]
    w = adj[np.ix_(site_of, site_of)].astype(float)
    np.fill_diagonal(w, 0.0)
    info = {"n_sites": int(m), "n_site_edges": int((adj.sum() - m) // 2)}
    return SpatialWeights(w, "delaunay", None, False, info)
