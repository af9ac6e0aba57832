"""The biased (V-statistic) HSIC estimate in dense, low-rank and three-sum form."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import LowRankGram

ORACLE_MAX_N = 64


@dataclass(frozen=True)
class HsicValue:
    value: float
    n: int
    mode: str  # "dense", "lowrank" or "oracle"
    ranks: tuple | None = None

    @property
    def reported(self) -> float:
        """The value clamped at zero (tiny negatives are rounding error)."""
        return max(self.value, 0.0)

    def __float__(self):
        return self.value


def double_center(K: np.ndarray) -> np.ndarray:
    """``H K H`` computed by subtracting row and column means."""
    K = np.asarray(K, dtype=float)
    row = K.mean(axis=1, keepdims=True)
    col = K.mean(axis=0, keepdims=True)
    return K - row - col + K.mean()


def _check_pair(Kx, Ky):
    Kx = np.asarray(Kx, dtype=float)
    Ky = np.asarray(Ky, dtype=float)
    if Kx.ndim != 2 or Kx.shape[0] != Kx.shape[1]:
        raise ValueError("Gram matrices must be square")
    if Kx.shape != Ky.shape:
        raise ValueError(f"dimension mismatch: {Kx.shape} vs {Ky.shape}")
    return Kx, Ky


def hsic_dense(Kx, Ky) -> HsicValue:
    """``tr(Kx H Ky H) / n^2`` from two full Gram matrices."""
    Kx, Ky = _check_pair(Kx, Ky)
    n = Kx.shape[0]
    value = float(np.sum(double_center(Kx) * double_center(Ky))) / n**2
    return HsicValue(value, n, "dense")


def hsic_oracle(Kx, Ky) -> HsicValue:
    """Reference three-sum form: joint term, product-of-marginals term, cross term.

    Only meant for cross-checking small problems.
    """
    Kx, Ky = _check_pair(Kx, Ky)
    n = Kx.shape[0]
    if n > ORACLE_MAX_N:
        raise ValueError(f"hsic_oracle is limited to n <= {ORACLE_MAX_N}, got {n}")
    joint = np.sum(Kx * Ky) / n**2
    marginals = Kx.sum() * Ky.sum() / n**4
    cross = 2.0 * np.sum(Kx.sum(axis=1) * Ky.sum(axis=1)) / n**3
    return HsicValue(float(joint + marginals - cross), n, "oracle")


def hsic_lowrank(A: LowRankGram, B: LowRankGram) -> HsicValue:
    """``||B^T H A||_F^2 / n^2`` from factors ``Kx ~ A A^T``, ``Ky ~ B B^T``.

    Nothing of size ``n x n`` is formed.
    """
    a = A.factor if isinstance(A, LowRankGram) else np.asarray(A, dtype=float)
    b = B.factor if isinstance(B, LowRankGram) else np.asarray(B, dtype=float)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]} rows")
    n = a.shape[0]
    ha = a - a.mean(axis=0)
    m = b.T @ ha
    return HsicValue(float(np.sum(m * m)) / n**2, n, "lowrank", (a.shape[1], b.shape[1]))
