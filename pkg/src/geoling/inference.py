"""Permutation tests, FDR control and the calibration / power harnesses.

Every test permutes the linguistic side only. Geographic Grams, weight
matrices and distance matrices are built once; each permutation just
reindexes the linguistic values. Permutations are evaluated in fixed-size
chunks, and permutation ``b`` always draws from the substream keyed by
``(seed, stream, b)``, so reports do not depend on the number of threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy import stats

from . import synthgen
from .classical import linguistic_distance
from .geometry import (
    delaunay_edges,
    distance_matrix,
    median_distance,
    weights_exponential,
    weights_knn,
    weights_threshold,
)
from .kernels import (
    gram_freq,
    gram_geo,
    lowrank_column,
    lowrank_geo,
    median_bandwidth,
)
from .hsic import double_center
from .lingdata import Dataset, METHODS, applicability

CHUNK = 64
MIN_PERMUTATIONS = 99
WEIGHT_KINDS = ("threshold", "knn", "exponential", "delaunay")
SWEEP_WARNING = "p-value is the minimum over a parameter sweep and is not calibrated"
FALLBACK_WARNING = "locations were sampled with replacement (pool smaller than count)"

# relative slack when comparing permuted statistics against the observed one,
# so that exact ties are not lost to rounding
TIE_RTOL = 1e-10


class ApplicabilityError(ValueError):
    """The requested method cannot be run on this kind of column."""


@dataclass(frozen=True)
class PermutationPlan:
    n_permutations: int = 999
    seed: int = 0
    tail: str = "upper"

    def __post_init__(self):
        if int(self.n_permutations) != self.n_permutations or self.n_permutations < MIN_PERMUTATIONS:
            raise ValueError(f"n_permutations must be an integer >= {MIN_PERMUTATIONS}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.tail != "upper":
            raise ValueError("only the upper (one-tailed) test is supported")


@dataclass
class TestReport:
    method: str
    observed: float
    p_value: float
    n_permutations: int
    permutation_mean: float
    permutation_sd: float
    seed: int
    params: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    __test__ = False  # keep pytest from collecting this class

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "observed": self.observed,
            "p_value": self.p_value,
            "n_permutations": self.n_permutations,
            "permutation_mean": self.permutation_mean,
            "permutation_sd": self.permutation_sd,
            "seed": self.seed,
            "params": dict(self.params),
            "warnings": list(self.warnings),
        }


@dataclass
class BatchEntry:
    name: str
    raw_p: float
    adjusted_p: float
    report: TestReport | None = None


@dataclass
class BatchReport:
    entries: list
    alpha: float
    failures: list = field(default_factory=list)

    @property
    def n_significant(self) -> int:
        return sum(e.adjusted_p <= self.alpha for e in self.entries)


# -- permutation draws --------------------------------------------------------


def permutation_rng(seed: int, stream: int, b: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(b)))))


def draw_permutations(n: int, seed: int, stream: int, start: int, stop: int) -> np.ndarray:
    """Permutations ``start..stop-1`` of ``range(n)`` as rows."""
    out = np.empty((stop - start, n), dtype=np.intp)
    for row, b in enumerate(range(start, stop)):
        out[row] = permutation_rng(seed, stream, b).permutation(n)
    return out


# -- batched statistics: values(perms) evaluates one row per permutation ----


class _Statistic:
    params: dict

    def values(self, perms: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def observed(self, n: int) -> float:
        return float(self.values(np.arange(n)[None, :])[0])


def _matmul(M, X):
    return np.asarray(M @ X)


class _OneHotQuadratic(_Statistic):
    """``scale * sum_c z_c[p]^T M z_c[p]`` for a one-hot ``Z``: HSIC, joins, Mantel on labels."""

    def __init__(self, onehot, M, scale, params):
        self.Z = onehot
        self.M = M
        self.scale = scale
        self.params = params

    def values(self, perms):
        b, n = perms.shape
        k = self.Z.shape[1]
        Zs = self.Z[perms.T].reshape(n, b * k)
        T = _matmul(self.M, Zs)
        return self.scale * (T * Zs).sum(axis=0).reshape(b, k).sum(axis=1)


class _DenseQuadratic(_Statistic):
    """``scale * sum_ij X[p_i, p_j] M_ij`` for a full linguistic matrix ``X``."""

    def __init__(self, X, M, scale, params):
        self.X = X
        self.M = M
        self.scale = scale
        self.params = params

    def values(self, perms):
        return np.array([self.scale * np.sum(self.X[np.ix_(p, p)] * self.M) for p in perms])


class _LowRankHsic(_Statistic):
    """``||B^T (H A)[p]||_F^2 / n^2`` with the geographic factor ``B`` fixed."""

    def __init__(self, centered_ling, geo, params):
        self.A = centered_ling
        self.B = geo
        self.params = params

    def values(self, perms):
        n = perms.shape[1]
        m = np.einsum("ns,bnr->bsr", self.B, self.A[perms], optimize=True)
        return (m * m).sum(axis=(1, 2)) / n**2


class _Moran(_Statistic):
    """``n / (r^T r) * (r[p]^T W r[p]) / sum(W)``."""

    def __init__(self, resid, W, params):
        self.r = resid
        self.W = W
        n = resid.shape[0]
        self.scale = n / float(resid @ resid) / float(W.sum())
        self.params = params

    def values(self, perms):
        R = self.r[perms.T]
        return self.scale * (R * _matmul(self.W, R)).sum(axis=0)


# -- building the statistic for a method ------------------------------------------


def _as_operator(weights):
    w = weights.w
    density = np.count_nonzero(w) / w.size
    return sp.csr_matrix(w) if density < 0.1 else w


def build_weights(ds: Dataset, kind: str | None = None, *, tau=None, knn=None, gamma=None, normalize=True):
    """Spatial weights for Moran's I / join counts; default cutoff is the median distance."""
    kind = kind or ("knn" if knn is not None else "threshold")
    if kind not in WEIGHT_KINDS:
        raise ValueError(f"unknown weights {kind!r}; expected one of {WEIGHT_KINDS}")
    if kind == "delaunay":
        return delaunay_edges(ds.points)
    dm = distance_matrix(ds.points)
    if kind == "threshold":
        tau = median_distance(ds.points, require_positive=True) if tau is None else tau
        return weights_threshold(dm, tau, normalize)
    if kind == "knn":
        return weights_knn(dm, 8 if knn is None else int(knn))
    if gamma is None:
        gamma = 1.0 / median_distance(ds.points, require_positive=True)
    return weights_exponential(dm, gamma, normalize)


def _weights_params(w):
    p = {"weights": w.kind}
    if w.param is not None:
        p[{"threshold": "tau", "exponential": "gamma", "knn": "k"}[w.kind]] = w.param
    p.update(w.info)
    return p


def _centered_offdiag(D):
    n = D.shape[0]
    iu = np.triu_indices(n, 1)
    mean = D[iu].mean()
    C = D - mean
    np.fill_diagonal(C, 0.0)
    ss = float(np.sum(C[iu] ** 2))
    return C, ss


def build_statistic(
    ds: Dataset,
    method: str,
    *,
    gamma: float | None = None,
    ling_gamma: float | None = None,
    lowrank_tol: float | None = None,
    weights: str | None = None,
    tau: float | None = None,
    knn: int | None = None,
) -> _Statistic:
    """Resolve parameters (median heuristics by default) and precompute the geo side."""
    verdict = applicability(ds.column, method)
    if not verdict:
        raise ApplicabilityError(verdict.reason)
    col, pts = ds.column, ds.points
    n = len(ds)

    if method == "hsic":
        gamma = median_bandwidth(pts) if gamma is None else float(gamma)
        params = {"gamma": gamma, "kernel_geo": "rbf", "metric": pts.metric}
        if not col.discrete:
            ling_gamma = median_bandwidth(col) if ling_gamma is None else float(ling_gamma)
            params["ling_gamma"] = ling_gamma
        if lowrank_tol is not None:
            tol = float(lowrank_tol)
            geo = lowrank_geo(pts, gamma, tol)
            ling = lowrank_column(col, ling_gamma, tol)
            params.update(lowrank_tol=tol, rank_geo=geo.rank, rank_ling=ling.rank)
            A = ling.factor - ling.factor.mean(axis=0)
            return _LowRankHsic(A, geo.factor, params)
        Kyc = double_center(gram_geo(pts, gamma))
        if col.discrete:
            return _OneHotQuadratic(col.onehot(), Kyc, 1.0 / n**2, params)
        return _DenseQuadratic(gram_freq(col, ling_gamma), Kyc, 1.0 / n**2, params)

    if method == "moran":
        kind = weights or ("knn" if knn is not None else "threshold")
        w = build_weights(ds, kind, tau=tau, knn=knn, gamma=gamma)
        x = col.as_real()
        if np.ptp(x) == 0:
            raise ValueError("zero variance: Moran's I is undefined for a constant variable")
        return _Moran(x - x.mean(), _as_operator(w), _weights_params(w))

    if method == "joins":
        kind = weights or ("knn" if knn is not None else "threshold" if tau is not None else "delaunay")
        w = build_weights(ds, kind, tau=tau, knn=knn, gamma=gamma, normalize=False)
        return _OneHotQuadratic(col.onehot(), _as_operator(w), 1.0, _weights_params(w))

    # mantel: geographic distance against linguistic distance
    Dy, syy = _centered_offdiag(distance_matrix(pts))
    Dx, sxx = _centered_offdiag(linguistic_distance(col))
    if sxx == 0 or syy == 0:
        raise ValueError("zero variance in distances")
    params = {"metric": pts.metric, "ling_distance": "delta" if col.discrete else "euclidean"}
    # sum over i<j of centered products, written as half the full double sum
    scale = 0.5 / math.sqrt(sxx * syy)
    if col.discrete:
        # disagreement = 1 - agreement; the constant part vanishes against the centered Dy
        return _OneHotQuadratic(col.onehot(), Dy, -scale, params)
    return _DenseQuadratic(Dx, Dy, scale, params)


# -- running tests ------------------------------------------------------------------


def _null_distribution(stat, n, plan, stream, workers, perms):
    if perms is not None:
        perms = np.asarray(perms, dtype=np.intp)
        chunks = [perms[i:i + CHUNK] for i in range(0, len(perms), CHUNK)]
        job = stat.values
    else:
        B = plan.n_permutations
        chunks = [(s, min(s + CHUNK, B)) for s in range(0, B, CHUNK)]

        def job(bounds):
            return stat.values(draw_permutations(n, plan.seed, stream, *bounds))
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, chunks))
    else:
        parts = [job(c) for c in chunks]
    return np.concatenate(parts)


def empirical_p(observed: float, null: np.ndarray) -> float:
    """Add-one estimate ``(1 + #{null >= observed}) / (1 + B)``; near-exact ties count."""
    null = np.asarray(null, dtype=float)
    slack = TIE_RTOL * max(abs(observed), float(np.abs(null).max(initial=0.0)))
    count = int(np.count_nonzero(null >= observed - slack))
    return (1 + count) / (1 + null.size)


def permutation_test(
    ds: Dataset,
    method: str,
    plan: PermutationPlan | None = None,
    *,
    stream: int = 0,
    workers: int = 1,
    perms=None,
    **method_params,
) -> TestReport:
    """One-tailed permutation test of geographic dependence in ``ds``.

    ``method_params`` go to :func:`build_statistic`. ``perms`` replaces the
    random draws with explicit permutations (rows), as in exhaustive tests.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    plan = PermutationPlan() if plan is None else plan
    stat = build_statistic(ds, method, **method_params)
    n = len(ds)
    observed = stat.observed(n)
    null = _null_distribution(stat, n, plan, stream, workers, perms)
    warnings = []
    if ds.meta.get("fallback"):
        warnings.append(FALLBACK_WARNING)
    return TestReport(
        method=method,
        observed=observed,
        p_value=empirical_p(observed, null),
        n_permutations=int(null.size),
        permutation_mean=float(null.mean()),
        permutation_sd=float(null.std(ddof=1)) if null.size > 1 else 0.0,
        seed=int(plan.seed),
        params=stat.params,
        warnings=warnings,
    )


def bh_fdr(raw_p) -> np.ndarray:
    """Benjamini-Hochberg adjusted p-values, in input order."""
    p = np.asarray(raw_p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("need a nonempty sequence of p-values")
    if np.any(~np.isfinite(p)) or p.min() <= 0 or p.max() > 1:
        raise ValueError("p-values must lie in (0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    adj = np.minimum(np.minimum.accumulate(scaled[::-1])[::-1], 1.0)
    out = np.empty(m)
    out[order] = adj
    return out


def run_batch(items, method: str, plan: PermutationPlan, alpha: float = 0.05, workers: int = 1, **method_params) -> BatchReport:
    """Test every ``(name, dataset)`` and BH-adjust the p-values.

    Items whose dataset is an exception instance, or whose test raises, are
    recorded as failures and skipped. Variable ``i`` uses permutation stream ``i``.
    """
    done, failures = [], []
    for i, (name, ds) in enumerate(items):
        if isinstance(ds, Exception):
            failures.append({"name": name, "error": str(ds)})
            continue
        try:
            done.append((name, permutation_test(ds, method, plan, stream=i, workers=workers, **method_params)))
        except ValueError as exc:
            failures.append({"name": name, "error": str(exc)})
    entries = []
    if done:
        adj = bh_fdr([r.p_value for _, r in done])
        entries = [BatchEntry(name, r.p_value, float(a), r) for (name, r), a in zip(done, adj)]
    return BatchReport(entries, alpha, failures)


# -- parameter sweeps ------------------------------------------------------------


@dataclass
class SweepResult:
    best_param: float
    min_p: float
    grid: list
    p_values: list
    warning: str = SWEEP_WARNING


def sweep_min_p(ds: Dataset, method: str, grid, plan: PermutationPlan, param: str = "tau", workers: int = 1, **method_params) -> SweepResult:
    """Run one test per grid value (stream = grid index) and keep the smallest p.

    Ties go to the earliest grid value.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("parameter grid is empty")
    ps = []
    for g, value in enumerate(grid):
        rep = permutation_test(ds, method, plan, stream=g, workers=workers, **{param: value}, **method_params)
        ps.append(rep.p_value)
    best = int(np.argmin(ps))
    return SweepResult(grid[best], ps[best], grid, ps)


def cutoff_grid(points, lo: float = 200.0, hi: float = 1000.0, step: float = 100.0, reference: float = 921.0):
    """Cutoffs scaled from a ``lo..hi`` grid so that ``reference`` maps to the median distance.

    With the defaults this is nine values spanning roughly 0.22 to 1.09
    times the median pairwise distance.
    """
    med = median_distance(points, require_positive=True)
    return [med * v / reference for v in np.arange(lo, hi + step / 2, step)]


# -- calibration and power ----------------------------------------------------------


@dataclass
class CalibrationResult:
    method: str
    p_values: np.ndarray
    alpha: float
    n_degenerate: int
    sweep: bool = False
    warnings: list = field(default_factory=list)

    @property
    def n_datasets(self) -> int:
        return int(self.p_values.size)

    @property
    def type1_rate(self) -> float:
        return float(np.mean(self.p_values < self.alpha)) if self.p_values.size else float("nan")

    @property
    def ks_statistic(self) -> float:
        return float(stats.kstest(self.p_values, "uniform").statistic)

    @property
    def ks_critical_1pct(self) -> float:
        return float(stats.kstwo.ppf(0.99, self.p_values.size))

    def qq_pairs(self) -> np.ndarray:
        """Rows ``(i / (N + 1), p_(i))``: uniform quantile against sorted p."""
        p = np.sort(self.p_values)
        u = np.arange(1, p.size + 1) / (p.size + 1)
        return np.column_stack([u, p])


@dataclass
class PowerResult:
    method: str
    power: float
    n_rejected: int
    n_datasets: int
    n_degenerate: int
    alpha: float
    p_values: np.ndarray


def _dataset_p(ds, method, plan, sweep, workers, method_params):
    if sweep is not None:
        grid = cutoff_grid(ds.points) if sweep is True else sweep
        return sweep_min_p(ds, method, grid, plan, workers=workers, **method_params).min_p
    return permutation_test(ds, method, plan, workers=workers, **method_params).p_value


def simulate_p_values(config, method, plan, n_datasets, regions=None, *, sweep=None, workers=1, **method_params):
    """p-values over ``n_datasets`` generated datasets; returns ``(p_values, n_degenerate)``.

    Dataset ``i`` uses data seed ``derive(config.seed, i)`` and permutation
    seed ``derive(plan.seed, i)``. A degenerate dataset (for example a
    constant variable under Moran's I) is skipped and counted.
    """
    config.validate()
    regions = synthgen.default_regions() if regions is None else regions
    ps, degenerate = [], 0
    for i in range(n_datasets):
        ds = synthgen.generate(config, regions, seed=synthgen.derive_seed(config.seed, i))
        plan_i = PermutationPlan(plan.n_permutations, synthgen.derive_seed(plan.seed, i))
        try:
            ps.append(_dataset_p(ds, method, plan_i, sweep, workers, method_params))
        except ApplicabilityError:
            raise
        except ValueError:
            degenerate += 1
    return np.array(ps), degenerate


def calibrate(config, method, plan, n_datasets, regions=None, *, alpha=0.05, sweep=None, workers=1, **method_params) -> CalibrationResult:
    """Null-scenario p-values with their Type-I rate and uniformity summary.

    ``sweep=True`` replaces each test by the min-p over :func:`cutoff_grid`
    (or pass an explicit grid), which is deliberately not calibrated.
    """
    if config.kind != "null":
        raise ValueError("calibration needs a null scenario")
    ps, deg = simulate_p_values(config, method, plan, n_datasets, regions, sweep=sweep, workers=workers, **method_params)
    warnings = [SWEEP_WARNING] if sweep is not None else []
    return CalibrationResult(method, ps, alpha, deg, sweep is not None, warnings)


def power(config, method, plan, n_datasets, regions=None, *, alpha=0.05, workers=1, **method_params) -> PowerResult:
    """Fraction of ``n_datasets`` with ``p < alpha``; degenerate datasets count as non-rejections."""
    ps, deg = simulate_p_values(config, method, plan, n_datasets, regions, workers=workers, **method_params)
    rejected = int(np.sum(ps < alpha))
    return PowerResult(method, rejected / n_datasets, rejected, n_datasets, deg, alpha, ps)


def power_curve(configs, method, plan, n_datasets, regions=None, *, alpha=0.05, workers=1, **method_params):
    """:func:`power` for each config in ``configs``."""
    return [power(c, method, plan, n_datasets, regions, alpha=alpha, workers=workers, **method_params) for c in configs]
