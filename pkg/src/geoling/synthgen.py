"""Synthetic geolinguistic datasets for calibration and power studies.

Each region gets ``1 + Poisson(mu_obs * population)`` observations placed
by sampling its pool of real locations (or uniformly in a disc around its
centroid). A per-region variant distribution ``theta`` is either constant
(the null), a linear ramp across space (a dialect continuum), or peaked
around one or more centers. Counts data draws one variant per observation;
frequency data gives each region a single Dirichlet(s * theta) draw.

Region CSV format: header ``id,population,centroid_x,centroid_y``. An
optional pool CSV has header ``region_id,x,y``.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import GeoPoint, PointSet
from .lingdata import Dataset, ObservationColumn

KINDS = ("null", "continuum", "centers")
DATA_MODES = ("counts", "frequency")

ANGLE_GRID = tuple(float(a) for a in range(0, 360, 3))


class ConfigError(ValueError):
    """Invalid scenario configuration."""


@dataclass(frozen=True)
class Region:
    id: str
    population: float
    centroid: GeoPoint
    pool: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.population >= 0:
            raise ValueError(f"region {self.id}: population must be nonnegative")
        c = GeoPoint(float(self.centroid[0]), float(self.centroid[1]))
        if not (math.isfinite(c.x) and math.isfinite(c.y)):
            raise ValueError(f"region {self.id}: centroid must be finite")
        object.__setattr__(self, "centroid", c)
        if self.pool is not None:
            pool = np.asarray(self.pool, dtype=float).reshape(-1, 2)
            object.__setattr__(self, "pool", pool if len(pool) else None)


def centroids(regions) -> np.ndarray:
    return np.array([r.centroid for r in regions], dtype=float)


# (column, row, spread in cells, peak multiplier) of the default metropolitan areas
DEFAULT_METROS = ((10.0, 9.0, 1.8, 350.0), (11.0, 0.0, 0.9, 80.0))


def default_regions(
    nx: int = 12,
    ny: int = 12,
    spacing: float = 10.0,
    aspect: float = 1.0,
    median_population: float = 6_000.0,
    sigma: float = 1.1,
    metros=DEFAULT_METROS,
    seed: int = 20170417,
) -> list[Region]:
    """A grid of ``nx * ny`` regions with a skewed population.

    Centroids sit at ``(i * spacing * aspect, j * spacing)``; cells are
    labelled ``r{i:02d}_{j:02d}``. Town sizes are log-normal (drawn once from
    a fixed seed) times ``1 + sum(peak * exp(-d^2 / (2 spread^2)))`` over the
    metropolitan areas, with ``d`` measured in cells. The defaults put a large
    conurbation in the north-east and a smaller city on the south-east edge,
    so most observations are urban and the rural cells stay sparse.
    """
    rng = np.random.default_rng(seed)
    base = median_population * np.exp(sigma * rng.standard_normal(nx * ny))
    regions = []
    for idx, (i, j) in enumerate((i, j) for j in range(ny) for i in range(nx)):
        boost = 1.0 + sum(
            peak * math.exp(-((i - ci) ** 2 + (j - cj) ** 2) / (2 * spread**2))
            for ci, cj, spread, peak in metros
        )
        pop = float(np.round(base[idx] * boost))
        regions.append(Region(f"r{i:02d}_{j:02d}", pop, GeoPoint(i * spacing * aspect, j * spacing)))
    return regions


def default_centers(regions=None, count: int = 25) -> list[GeoPoint]:
    """Centroids of the ``count`` most populous regions (ties by position)."""
    regions = default_regions() if regions is None else regions
    order = sorted(range(len(regions)), key=lambda i: (-regions[i].population, i))
    return [regions[i].centroid for i in order[:count]]


# -- region files -----------------------------------------------------------


def read_regions(path, pool_path=None) -> list[Region]:
    pools: dict[str, list] = {}
    if pool_path is not None:
        with open(pool_path, encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                pools.setdefault(row["region_id"], []).append((float(row["x"]), float(row["y"])))
    regions = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"id", "population", "centroid_x", "centroid_y"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"region file lacks columns {sorted(missing)}")
        for row in reader:
            rid = row["id"]
            pool = pools.get(rid)
            regions.append(
                Region(
                    rid,
                    float(row["population"]),
                    GeoPoint(float(row["centroid_x"]), float(row["centroid_y"])),
                    None if pool is None else np.array(pool),
                )
            )
    if not regions:
        raise ValueError("region file has no rows")
    return regions


def write_regions(regions, path, pool_path=None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "population", "centroid_x", "centroid_y"])
        for r in regions:
            w.writerow([r.id, repr(float(r.population)), repr(r.centroid.x), repr(r.centroid.y)])
    if pool_path is not None:
        with open(pool_path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["region_id", "x", "y"])
            for r in regions:
                for x, y in r.pool if r.pool is not None else ():
                    w.writerow([r.id, repr(float(x)), repr(float(y))])


# -- scenario configuration ---------------------------------------------------


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str = "null"
    theta: tuple = (0.5, 0.5)
    angle: float = 0.0
    theta_min: float = 0.25
    theta_max: float = 0.75
    centers: tuple = ()
    radius: float = 15.0
    slope: float | None = None
    mu_obs: float = 1e-5
    data_mode: str = "counts"
    k: int = 2
    s: float = 10.0
    third_variant_fraction: float = 0.1
    outlier_fraction: float = 0.0
    location_radius: float = 5.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(t) for t in self.theta))
        object.__setattr__(
            self, "centers", tuple(GeoPoint(float(c[0]), float(c[1])) for c in self.centers)
        )

    def validate(self) -> "ScenarioConfig":
        def bad(msg):
            raise ConfigError(msg)

        if self.kind not in KINDS:
            bad(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.data_mode not in DATA_MODES:
            bad(f"data_mode must be one of {DATA_MODES}, got {self.data_mode!r}")
        if not (isinstance(self.k, int) and self.k >= 2):
            bad("k must be an integer >= 2")
        if not self.mu_obs > 0:
            bad("mu_obs must be positive")
        if not self.s > 0:
            bad("s must be positive")
        if not 0 <= self.outlier_fraction < 1:
            bad("outlier_fraction must lie in [0, 1)")
        if self.outlier_fraction > 0 and not (self.data_mode == "frequency" and self.k == 2):
            bad("outliers are only defined for two-variant frequency data")
        if self.location_radius < 0:
            bad("location_radius must be nonnegative")
        if not 0 <= self.seed < 2**64:
            bad("seed must be a 64-bit unsigned integer")
        if self.kind == "null":
            th = np.asarray(self.theta)
            if th.size != self.k or th.min() < 0 or abs(th.sum() - 1) > 1e-9:
                bad(f"null theta must be a length-{self.k} probability vector")
        else:
            if not 0 < self.theta_min < self.theta_max < 1:
                bad("signal scenarios need 0 < theta_min < theta_max < 1")
            if self.k > 2 and not 0 <= self.third_variant_fraction < 1:
                bad("third_variant_fraction must lie in [0, 1)")
        if self.kind == "centers":
            if not self.centers:
                bad("centers scenario needs at least one center")
            if not self.radius >= 0:
                bad("radius must be nonnegative")
            if self.slope is not None and not self.slope > 0:
                bad("slope must be positive")
        return self

    @property
    def effective_slope(self) -> float:
        if self.slope is not None:
            return self.slope
        return (self.theta_max - self.theta_min) / (2 * self.radius) if self.radius > 0 else 1.0

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["theta"] = list(self.theta)
        d["centers"] = [list(c) for c in self.centers]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
        try:
            return cls(**d).validate()
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text: str) -> "ScenarioConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"scenario file is not valid JSON: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("scenario file must hold a JSON object")
        return cls.from_dict(d)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())


# -- generation steps -------------------------------------------------------


def region_counts(regions, mu_obs: float, rng) -> np.ndarray:
    """``n_i = 1 + Poisson(mu_obs * population_i)``."""
    if not mu_obs > 0:
        raise ValueError("mu_obs must be positive")
    pops = np.array([r.population for r in regions], dtype=float)
    return 1 + rng.poisson(mu_obs * pops)


def sample_locations(region: Region, n: int, rng, radius: float = 0.0):
    """Draw ``n`` locations for ``region``. Returns ``(coords, used_replacement)``.

    A pool with at least ``n`` entries is sampled without replacement; a
    smaller pool falls back to sampling with replacement. Without a pool,
    points are uniform in a disc of ``radius`` around the centroid.
    """
    if n < 1:
        raise ValueError("need at least one location")
    if region.pool is not None:
        m = len(region.pool)
        if m >= n:
            return region.pool[rng.choice(m, size=n, replace=False)], False
        return region.pool[rng.choice(m, size=n, replace=True)], True
    r = radius * np.sqrt(rng.random(n))
    phi = 2 * np.pi * rng.random(n)
    c = np.asarray(region.centroid)
    return c + np.column_stack([r * np.cos(phi), r * np.sin(phi)]), False


def _two_variant(p0: np.ndarray, k: int, extra: float) -> np.ndarray:
    """Expand variant-0 frequencies to ``k`` columns; variants >= 2 share ``extra``."""
    p0 = np.asarray(p0, dtype=float)
    if k == 2:
        return np.column_stack([p0, 1 - p0])
    rest = np.full((len(p0), k - 2), extra / (k - 2))
    return np.column_stack([(1 - extra) * p0, (1 - extra) * (1 - p0), rest])


def theta_continuum(regions, angle: float, theta_min: float, theta_max: float, k: int = 2, extra: float = 0.0):
    """Variant-0 frequency ramping linearly along direction ``angle`` (degrees).

    Centroid projections are min-max scaled to [0, 1] and mapped onto
    ``[theta_min, theta_max]``.
    """
    a = math.radians(angle % 360.0)
    c = centroids(regions)
    proj = c[:, 0] * math.cos(a) + c[:, 1] * math.sin(a)
    span = proj.max() - proj.min()
    scale = max(np.abs(c).max(), 1.0)
    if span <= 1e-12 * scale:
        raise ValueError(f"centroids do not vary along angle {angle}; the ramp is degenerate")
    t = (proj - proj.min()) / span
    return _two_variant(theta_min + t * (theta_max - theta_min), k, extra)


def theta_centers(regions, centers, radius: float, theta_max: float, theta_min: float, slope: float, k: int = 2, extra: float = 0.0):
    """``theta_max`` within ``radius`` of the nearest center, then a linear decay floored at ``theta_min``."""
    if not len(centers):
        raise ValueError("need at least one center")
    if not slope > 0:
        raise ValueError("slope must be positive")
    c = centroids(regions)
    ctr = np.asarray(centers, dtype=float).reshape(-1, 2)
    d = np.sqrt(((c[:, None, :] - ctr[None, :, :]) ** 2).sum(-1)).min(axis=1)
    p0 = np.where(d <= radius, theta_max, np.maximum(theta_min, theta_max - slope * (d - radius)))
    return _two_variant(p0, k, extra)


def theta_field(config: ScenarioConfig, regions) -> np.ndarray:
    """Per-region variant distributions, shape ``(n_regions, k)``."""
    extra = config.third_variant_fraction if config.k > 2 else 0.0
    if config.kind == "null":
        return np.tile(np.asarray(config.theta, dtype=float), (len(regions), 1))
    if config.kind == "continuum":
        return theta_continuum(regions, config.angle, config.theta_min, config.theta_max, config.k, extra)
    return theta_centers(
        regions, config.centers, config.radius, config.theta_max, config.theta_min,
        config.effective_slope, config.k, extra,
    )


def _draw_variants(theta_row, n, rng):
    cdf = np.cumsum(theta_row)
    v = np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right")
    return np.minimum(v, len(theta_row) - 1)


def gen_counts_dataset(config: ScenarioConfig, regions, rng, theta=None) -> Dataset:
    """One variant per observation, drawn from its region's ``theta``."""
    theta = theta_field(config, regions) if theta is None else np.asarray(theta)
    counts = region_counts(regions, config.mu_obs, rng)
    coords, values, region_of, fallback = [], [], [], False
    for idx, (region, n_i) in enumerate(zip(regions, counts)):
        pts, repl = sample_locations(region, int(n_i), rng, config.location_radius)
        fallback |= repl
        coords.append(pts)
        values.append(_draw_variants(theta[idx], int(n_i), rng))
        region_of.append(np.full(int(n_i), idx))
    values = np.concatenate(values)
    k = theta.shape[1]
    if k == 2:
        column = ObservationColumn.binary(values)
    else:
        column = ObservationColumn.categorical(values, k=k, labels=[f"v{j}" for j in range(k)])
    meta = {"fallback": bool(fallback), "region_of": np.concatenate(region_of)}
    return Dataset(PointSet(np.vstack(coords)), column, "synthetic", meta)


def _dirichlet(alpha, rng):
    out = np.zeros_like(alpha)
    pos = alpha > 0
    if pos.sum() == 1:
        out[pos] = 1.0
    else:
        out[pos] = rng.dirichlet(alpha[pos])
    return out


def gen_frequency_dataset(config: ScenarioConfig, regions, rng, theta=None) -> Dataset:
    """One observation per region at its centroid, ``phi ~ Dirichlet(s * theta_i)``.

    Two-variant data is returned as a scalar column holding variant 0's share.
    """
    theta = theta_field(config, regions) if theta is None else np.asarray(theta)
    phi = np.array([_dirichlet(config.s * th, rng) for th in theta])
    column = ObservationColumn.frequency(phi[:, 0] if theta.shape[1] == 2 else phi)
    meta = {"fallback": False, "region_of": np.arange(len(regions))}
    return Dataset(PointSet(centroids(regions)), column, "synthetic", meta)


def inject_outliers(ds: Dataset, fraction: float, rng) -> Dataset:
    """Overwrite ``round(fraction * n)`` random scalar frequencies with 0 or 1."""
    col = ds.column
    if not (col.shape == "frequency" and col.k == 1):
        raise ValueError("outliers need a scalar frequency column")
    if not 0 <= fraction < 1:
        raise ValueError("fraction must lie in [0, 1)")
    n = len(col)
    count = int(math.floor(fraction * n + 0.5))
    if count == 0:
        return ds
    values = col.values[:, 0].copy()
    idx = rng.choice(n, size=count, replace=False)
    values[idx] = rng.integers(0, 2, size=count).astype(float)
    meta = dict(ds.meta, n_outliers=count)
    return Dataset(ds.points, ObservationColumn.frequency(values), ds.variable_name, meta)


def generate(config: ScenarioConfig, regions=None, seed: int | None = None) -> Dataset:
    """Generate one dataset; ``seed`` overrides ``config.seed``."""
    config.validate()
    regions = default_regions() if regions is None else regions
    rng = np.random.default_rng(config.seed if seed is None else seed)
    if config.data_mode == "counts":
        return gen_counts_dataset(config, regions, rng)
    ds = gen_frequency_dataset(config, regions, rng)
    if config.outlier_fraction > 0:
        ds = inject_outliers(ds, config.outlier_fraction, rng)
    return ds


def derive_seed(base: int, *keys: int) -> int:
    """A 64-bit seed determined by ``base`` and the integer ``keys``."""
    ss = np.random.SeedSequence(int(base), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0])


def scenario_suites(
    base: ScenarioConfig | None = None,
    mu_grid=(1e-5, 2e-5, 4e-5),
    s_grid=(3.0, 10.0, 30.0),
    centers=None,
    replicates: int = 4,
) -> dict:
    """Canonical experiment grids.

    ``continuum_*`` holds one config per angle (0 to 357 step 3) per grid
    value; ``centers_*`` one per center per replicate. Counts suites cross
    with ``mu_grid``, frequency suites with ``s_grid``.
    """
    base = ScenarioConfig() if base is None else base
    centers = default_centers() if centers is None else list(centers)
    suites: dict[str, list] = {
        "angles": list(ANGLE_GRID),
        "centers": [tuple(c) for c in centers],
    }
    for mode, key, grid in (("counts", "mu_obs", mu_grid), ("frequency", "s", s_grid)):
        cont, cent = [], []
        for g, value in enumerate(grid):
            for a, angle in enumerate(ANGLE_GRID):
                cont.append(base.replace(kind="continuum", data_mode=mode, angle=angle,
                                         seed=derive_seed(base.seed, 0, g, a), **{key: value}))
            for c, ctr in enumerate(centers):
                for rep in range(replicates):
                    cent.append(base.replace(kind="centers", data_mode=mode, centers=(ctr,),
                                             seed=derive_seed(base.seed, 1, g, c, rep), **{key: value}))
        suites[f"continuum_{mode}"] = cont
        suites[f"centers_{mode}"] = cent
    return suites
