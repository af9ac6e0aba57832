import numpy as np
import pytest
from hypothesis import given, strategies as st

from geoling import synthgen
from geoling.geometry import GeoPoint
from geoling.lingdata import Dataset, ObservationColumn
from geoling.geometry import PointSet
from geoling.synthgen import ConfigError, Region, ScenarioConfig


def line_regions(xs, pop=1000.0):
    return [Region(f"r{i}", pop, GeoPoint(x, 0.0)) for i, x in enumerate(xs)]


class TestRegions:
    def test_default_grid(self):
        regs = synthgen.default_regions()
        assert len(regs) == 144
        assert regs[0].id == "r00_00" and regs[13].centroid == GeoPoint(10.0, 10.0)
        pops = np.array([r.population for r in regs])
        assert pops.min() > 0
        # skewed: the mean sits well above the median
        assert pops.mean() > 3 * np.median(pops)
        assert synthgen.default_regions() == regs

    def test_centers(self):
        regs = synthgen.default_regions()
        centers = synthgen.default_centers(regs)
        pops = sorted((r.population for r in regs), reverse=True)
        top = {r.centroid for r in regs if r.population >= pops[24]}
        assert len(centers) == 25 and set(centers) == top

    def test_file_round_trip(self, tmp_path):
        regs = [
            Region("a", 10.0, GeoPoint(0, 0), np.array([[0.1, 0.2], [0.3, 0.4]])),
            Region("b", 0.0, GeoPoint(5, 5)),
        ]
        synthgen.write_regions(regs, tmp_path / "r.csv", tmp_path / "p.csv")
        back = synthgen.read_regions(tmp_path / "r.csv", tmp_path / "p.csv")
        assert back == regs
        assert np.array_equal(back[0].pool, regs[0].pool) and back[1].pool is None

    def test_bad_region(self):
        with pytest.raises(ValueError):
            Region("x", -1.0, GeoPoint(0, 0))


class TestCounts:
    def test_empty_region_gets_one(self, rng):
        assert synthgen.region_counts(line_regions([0, 1], pop=0.0), 1e-5, rng).tolist() == [1, 1]

    def test_expected_count(self):
        rng = np.random.default_rng(0)
        n = synthgen.region_counts(line_regions([0] * 20000, 100_000.0), 1e-5, rng)
        assert n.mean() == pytest.approx(2.0, abs=0.03)

    def test_poisson_mean(self):
        rng = np.random.default_rng(1)
        n = synthgen.region_counts(line_regions([0] * 100_000, 3.0), 1.0, rng)
        assert 2.97 <= (n - 1).mean() <= 3.03


class TestLocations:
    def test_full_pool(self, rng):
        pool = np.arange(10.0).reshape(5, 2)
        pts, fb = synthgen.sample_locations(Region("a", 1, (0, 0), pool), 5, rng)
        assert not fb and sorted(map(tuple, pts)) == sorted(map(tuple, pool))

    def test_centroid_only(self, rng):
        pts, fb = synthgen.sample_locations(Region("a", 1, (3, 4)), 6, rng, radius=0)
        assert not fb and np.all(pts == [3, 4])

    def test_small_pool_fallback(self, rng):
        pool = np.array([[0.0, 0], [1, 1], [2, 2]])
        pts, fb = synthgen.sample_locations(Region("a", 1, (0, 0), pool), 5, rng)
        assert fb and len(pts) == 5 and all(tuple(p) in {(0, 0), (1, 1), (2, 2)} for p in pts)

    def test_disc(self, rng):
        pts, _ = synthgen.sample_locations(Region("a", 1, (3, 4)), 500, rng, radius=2.0)
        assert np.hypot(pts[:, 0] - 3, pts[:, 1] - 4).max() <= 2.0


class TestTheta:
    def test_continuum_endpoints(self):
        th = synthgen.theta_continuum(line_regions([0, 10]), 0, 0.1, 0.9)
        assert th[:, 0].tolist() == pytest.approx([0.1, 0.9])

    def test_degenerate_projection(self):
        with pytest.raises(ValueError):
            synthgen.theta_continuum(line_regions([0, 10, 20]), 90, 0.1, 0.9)
        with pytest.raises(ValueError):
            synthgen.theta_continuum(line_regions([5, 5]), 0, 0.1, 0.9)

    @given(st.floats(-720, 720), st.integers(2, 4))
    def test_periodic_and_on_simplex(self, angle, k):
        regs = synthgen.default_regions()
        a = synthgen.theta_continuum(regs, angle, 0.25, 0.75, k, 0.1)
        b = synthgen.theta_continuum(regs, angle + 360, 0.25, 0.75, k, 0.1)
        assert np.allclose(a, b, atol=1e-12)
        assert np.abs(a.sum(axis=1) - 1).max() < 1e-9 and a.min() >= 0

    def test_centers(self):
        regs = line_regions([0, 5, 20, 100])
        th = synthgen.theta_centers(regs, [(0, 0)], 5, 0.8, 0.2, 0.03)[:, 0]
        assert th[0] == 0.8 and th[1] == 0.8
        assert th[2] == pytest.approx(0.8 - 0.03 * 15)
        assert th[3] == 0.2
        edge = 5 + (0.8 - 0.2) / 0.03
        assert synthgen.theta_centers(line_regions([edge]), [(0, 0)], 5, 0.8, 0.2, 0.03)[0, 0] == pytest.approx(0.2, abs=1e-12)

    def test_nearest_center(self):
        th = synthgen.theta_centers(line_regions([90]), [(0, 0), (100, 0)], 5, 0.8, 0.2, 0.01)
        assert th[0, 0] == pytest.approx(0.8 - 0.01 * 5)

    def test_default_slope(self):
        cfg = ScenarioConfig(kind="centers", centers=((0, 0),), radius=10)
        assert cfg.effective_slope == pytest.approx(0.5 / 20)


class TestGeneration:
    def test_pure_variant(self, rng):
        cfg = ScenarioConfig(theta=(1.0, 0.0))
        ds = synthgen.gen_counts_dataset(cfg, synthgen.default_regions(), rng)
        assert np.all(ds.column.values == 0)

    def test_null_fraction(self, rng):
        cfg = ScenarioConfig(mu_obs=1.0)
        regs = line_regions([0], pop=100_000.0)
        ds = synthgen.gen_counts_dataset(cfg, regs, rng)
        assert abs(np.mean(ds.column.values == 0) - 0.5) <= 0.01

    def test_three_variants(self, rng):
        cfg = ScenarioConfig(k=3, theta=(0.45, 0.45, 0.1), mu_obs=1.0)
        ds = synthgen.gen_counts_dataset(cfg, line_regions([0], pop=100_000.0), rng)
        frac = np.bincount(ds.column.values, minlength=3) / len(ds)
        assert np.abs(frac - [0.45, 0.45, 0.1]).max() <= 0.01
        assert ds.column.shape == "categorical" and ds.column.labels == ("v0", "v1", "v2")

    def test_three_variant_continuum_field(self):
        cfg = ScenarioConfig(kind="continuum", k=3, third_variant_fraction=0.1)
        th = synthgen.theta_field(cfg, synthgen.default_regions())
        assert np.allclose(th[:, 2], 0.1) and np.allclose(th.sum(axis=1), 1)

    def test_dirichlet_concentrates(self, rng):
        regs = line_regions(np.arange(200.0))
        theta = np.tile([0.3, 0.7], (200, 1))
        ds = synthgen.gen_frequency_dataset(ScenarioConfig(data_mode="frequency", s=1e6), regs, rng, theta)
        assert np.abs(ds.column.values[:, 0] - 0.3).max() < 1e-2

    def test_dirichlet_mean_and_variance(self, rng):
        regs = line_regions(np.zeros(100_000))
        theta = np.tile([0.3, 0.7], (len(regs), 1))
        phi = synthgen.gen_frequency_dataset(ScenarioConfig(data_mode="frequency", s=5), regs, rng, theta).column.values[:, 0]
        assert abs(phi.mean() - 0.3) <= 0.005
        flat = np.tile([0.5, 0.5], (len(regs), 1))
        u = synthgen.gen_frequency_dataset(ScenarioConfig(data_mode="frequency", s=2), regs, rng, flat).column.values[:, 0]
        assert abs(u.var() - 1 / 12) <= 0.003

    def test_frequency_shapes(self):
        regs = synthgen.default_regions()
        two = synthgen.generate(ScenarioConfig(data_mode="frequency"), regs)
        assert two.column.k == 1 and len(two) == 144
        three = synthgen.generate(ScenarioConfig(data_mode="frequency", k=3, theta=(0.2, 0.3, 0.5)), regs)
        assert three.column.k == 3 and np.allclose(three.column.values.sum(axis=1), 1)

    def test_zero_component_dirichlet(self, rng):
        regs = line_regions([0, 1])
        theta = np.array([[1.0, 0.0], [0.5, 0.5]])
        phi = synthgen.gen_frequency_dataset(ScenarioConfig(data_mode="frequency"), regs, rng, theta).column.values
        assert phi[0, 0] == 1.0

    @given(st.integers(0, 2**63), st.sampled_from(["null", "continuum", "centers"]), st.sampled_from(["counts", "frequency"]))
    def test_reproducible(self, seed, kind, mode):
        cfg = ScenarioConfig(kind=kind, data_mode=mode, mu_obs=2e-6, centers=((50, 50),), seed=seed)
        a, b = synthgen.generate(cfg), synthgen.generate(cfg)
        assert np.array_equal(a.points.coords, b.points.coords)
        assert np.array_equal(a.column.values, b.column.values)


class TestOutliers:
    def _ds(self, n):
        return Dataset(PointSet(np.column_stack([np.arange(n), np.zeros(n)])), ObservationColumn.frequency(np.full(n, 0.5)))

    def test_zero_fraction(self, rng):
        ds = self._ds(20)
        assert synthgen.inject_outliers(ds, 0.0, rng) is ds

    def test_all_replaced(self, rng):
        out = synthgen.inject_outliers(self._ds(10), 0.95, rng)
        assert set(out.column.values[:, 0]) <= {0.0, 1.0}

    def test_count(self, rng):
        out = synthgen.inject_outliers(self._ds(100), 0.1, rng)
        assert out.meta["n_outliers"] == 10
        assert np.sum(out.column.values[:, 0] != 0.5) == 10

    def test_needs_scalar(self, rng):
        ds = Dataset(PointSet([(0, 0), (1, 1)]), ObservationColumn.binary([0, 1]))
        with pytest.raises(ValueError):
            synthgen.inject_outliers(ds, 0.1, rng)


class TestConfig:
    @pytest.mark.parametrize(
        "changes",
        [
            dict(kind="ramp"), dict(data_mode="raw"), dict(k=1), dict(mu_obs=0), dict(s=-1),
            dict(theta=(0.6, 0.6)), dict(kind="continuum", theta_min=0.8, theta_max=0.2),
            dict(kind="centers"), dict(outlier_fraction=0.1), dict(kind="centers", centers=((0, 0),), slope=-1),
            dict(seed=-3),
        ],
    )
    def test_invalid(self, changes):
        with pytest.raises(ConfigError):
            ScenarioConfig(**changes).validate()

    def test_json_round_trip(self, tmp_path):
        cfg = ScenarioConfig(kind="centers", centers=((1, 2), (3, 4)), radius=7.5, seed=99)
        cfg.save(tmp_path / "s.json")
        assert ScenarioConfig.load(tmp_path / "s.json") == cfg

    def test_bad_json(self):
        for text in ("{", "[1, 2]", '{"colour": 1}', '{"k": "two"}'):
            with pytest.raises(ConfigError):
                ScenarioConfig.loads(text)


class TestSuites:
    def test_sizes(self):
        suites = synthgen.scenario_suites(mu_grid=(1e-5,), s_grid=(10.0,))
        assert len(suites["angles"]) == 120
        assert len(suites["centers_counts"]) == 100
        assert len(suites["continuum_frequency"]) == 120
        seeds = [c.seed for c in suites["continuum_counts"] + suites["centers_counts"]]
        assert len(set(seeds)) == len(seeds)

    def test_derive_seed(self):
        assert synthgen.derive_seed(1, 2) == synthgen.derive_seed(1, 2)
        assert synthgen.derive_seed(1, 2) != synthgen.derive_seed(1, 3) != synthgen.derive_seed(2, 2)
