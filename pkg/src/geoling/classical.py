"""Moran's I, join count analysis and the Mantel test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SpatialWeights
from .lingdata import ObservationColumn


@dataclass(frozen=True)
class MoranResult:
    I: float
    n: int

    @property
    def null_expectation(self) -> float:
        return -1.0 / (self.n - 1)


@dataclass(frozen=True)
class JoinCountResult:
    num_agree: float
    total_weight: float


@dataclass(frozen=True)
class MantelResult:
    r: float
    pairs_used: int


def _weights(W) -> np.ndarray:
    w = W.w if isinstance(W, SpatialWeights) else np.asarray(W, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("weight matrix must be square")
    return w


def morans_i(x, W) -> MoranResult:
    """Moran's I of real values ``x`` under spatial weights ``W``.

    ``I = n / sum(r^2) * (r^T W r) / sum(W)`` with residuals ``r = x - mean(x)``.
    """
    if isinstance(x, ObservationColumn):
        x = x.as_real()
    x = np.asarray(x, dtype=float)
    w = _weights(W)
    n = x.shape[0]
    if w.shape[0] != n:
        raise ValueError(f"{n} values but a {w.shape[0]}x{w.shape[0]} weight matrix")
    if np.ptp(x) == 0:
        raise ValueError("zero variance: Moran's I is undefined for a constant variable")
    s0 = w.sum()
    if not s0 > 0:
        raise ValueError("empty weights")
    r = x - x.mean()
    I = n / (r @ r) * (r @ w @ r) / s0
    return MoranResult(float(I), n)


def _codes(x):
    if isinstance(x, ObservationColumn):
        if not x.discrete:
            raise ValueError("join counts need discrete (binary or categorical) data")
        return x.values
    x = np.asarray(x)
    if x.dtype.kind == "f":
        raise ValueError("join counts need discrete (binary or categorical) data")
    return x


def join_counts(x, W) -> JoinCountResult:
    """Weighted agreement count ``sum_ij w_ij [x_i == x_j]``."""
    codes = _codes(x)
    w = _weights(W)
    if w.shape[0] != codes.shape[0]:
        raise ValueError("weights and observations differ in length")
    total = float(w.sum())
    if not total > 0:
        raise ValueError("empty weights")
    same = codes[:, None] == codes[None, :]
    return JoinCountResult(float(np.sum(w[same])), total)


def _upper(d):
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError("distance matrices must be square")
    return d[np.triu_indices(d.shape[0], 1)]


def mantel(Dx, Dy) -> MantelResult:
    """Pearson correlation of paired upper-triangle entries of two distance matrices."""
    a, b = _upper(Dx), _upper(Dy)
    n = np.asarray(Dx).shape[0]
    if np.asarray(Dy).shape[0] != n:
        raise ValueError("distance matrices differ in size")
    if n < 3:
        raise ValueError("the Mantel test needs at least 3 points")
    a = a - a.mean()
    b = b - b.mean()
    saa, sbb = a @ a, b @ b
    if saa == 0 or sbb == 0:
        raise ValueError("zero variance in distances")
    r = (a @ b) / np.sqrt(saa * sbb)
    return MantelResult(float(np.clip(r, -1.0, 1.0)), a.size)


def linguistic_distance(col: ObservationColumn) -> np.ndarray:
    """Pairwise distances between observations.

    Discrete values get 0/1 disagreement, scalar frequencies the absolute
    difference, frequency vectors the Euclidean distance.
    """
    v = col.values
    if col.discrete:
        return (v[:, None] != v[None, :]).astype(float)
    if col.k == 1:
        return np.abs(v[:, 0][:, None] - v[:, 0][None, :])
    diff = v[:, None, :] - v[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
