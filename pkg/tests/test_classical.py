import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from geoling.classical import join_counts, linguistic_distance, mantel, morans_i
from geoling.geometry import SpatialWeights
from geoling.lingdata import ObservationColumn


def moran_loops(x, w):
    """Moran's I by explicit double sums."""
    n = len(x)
    m = sum(x) / n
    num = sum(w[i][j] * (x[i] - m) * (x[j] - m) for i in range(n) for j in range(n))
    den = sum((xi - m) ** 2 for xi in x)
    s0 = sum(w[i][j] for i in range(n) for j in range(n))
    return n / s0 * num / den


def random_weights(r, n):
    w = r.uniform(0, 1, (n, n)) * (r.uniform(size=(n, n)) < 0.7)
    np.fill_diagonal(w, 0)
    if w.sum() == 0:
        w[0, 1] = 1.0
    return w


class TestMoran:
    def test_two_points(self):
        assert morans_i([0, 1], [[0, 1], [1, 0]]).I == pytest.approx(-1.0, abs=1e-15)

    def test_two_blocks(self):
        w = np.kron(np.eye(2), np.ones((2, 2))) - np.eye(4)
        assert morans_i([0, 0, 1, 1], w).I == pytest.approx(1.0, abs=1e-15)

    def test_matches_loops(self, rng):
        x = rng.normal(size=7)
        w = random_weights(rng, 7)
        assert morans_i(x, w).I == pytest.approx(moran_loops(list(x), w.tolist()), rel=1e-12)

    def test_exhaustive_null_mean_n4(self, rng):
        x = rng.normal(size=4)
        w = random_weights(rng, 4)
        vals = [moran_loops([x[i] for i in p], w.tolist()) for p in itertools.permutations(range(4))]
        assert np.mean(vals) == pytest.approx(-1 / 3, abs=1e-12)
        assert morans_i(x, w).null_expectation == pytest.approx(-1 / 3)

    def test_errors(self):
        with pytest.raises(ValueError, match="zero variance"):
            morans_i([1, 1, 1], np.ones((3, 3)) - np.eye(3))
        with pytest.raises(ValueError, match="empty"):
            morans_i([0, 1, 2], np.zeros((3, 3)))
        with pytest.raises(ValueError):
            morans_i([0, 1], np.ones((3, 3)))

    def test_accepts_columns_and_weight_objects(self):
        w = SpatialWeights(np.array([[0.0, 1.0], [1.0, 0.0]]), "threshold", 2.0)
        assert morans_i(ObservationColumn.binary([0, 1]), w).I == pytest.approx(-1.0)

    @given(st.integers(3, 12), st.integers(0, 2**32 - 1), st.floats(-5, 5), st.floats(-3, 3), st.floats(0.1, 10))
    def test_invariances(self, n, seed, a, b, c):
        if abs(a) < 1e-3:
            return
        r = np.random.default_rng(seed)
        x = r.normal(size=n)
        w = random_weights(r, n)
        base = morans_i(x, w).I
        assert morans_i(a * x + b, w).I == pytest.approx(base, abs=1e-10)
        assert morans_i(x, c * w).I == pytest.approx(base, abs=1e-10)


class TestJoinCounts:
    w2 = np.array([[0.0, 1.0], [1.0, 0.0]])

    def test_pairs(self):
        assert join_counts(ObservationColumn.binary([1, 1]), self.w2).num_agree == 2
        assert join_counts(ObservationColumn.binary([0, 1]), self.w2).num_agree == 0

    def test_four_cycle(self):
        w = np.zeros((4, 4))
        for i in range(4):
            w[i, (i + 1) % 4] = w[(i + 1) % 4, i] = 1
        res = join_counts(ObservationColumn.categorical([0, 0, 1, 1]), w)
        assert res.num_agree == 4 and res.total_weight == 8

    def test_rejects_frequency(self):
        with pytest.raises(ValueError):
            join_counts(ObservationColumn.frequency([0.1, 0.2]), self.w2)
        with pytest.raises(ValueError):
            join_counts(np.array([0.1, 0.2]), self.w2)

    @given(st.integers(2, 10), st.integers(0, 2**32 - 1))
    def test_relabeling_invariance(self, n, seed):
        r = np.random.default_rng(seed)
        x = r.integers(0, 3, n)
        w = random_weights(r, n)
        perm = r.permutation(3)
        a = join_counts(ObservationColumn.categorical(x, k=3), w).num_agree
        b = join_counts(ObservationColumn.categorical(perm[x], k=3), w).num_agree
        assert a == pytest.approx(b, abs=1e-12)
        loops = sum(w[i, j] for i in range(n) for j in range(n) if x[i] == x[j])
        assert a == pytest.approx(loops, abs=1e-12)

    def test_binary_and_categorical_agree(self, rng):
        x = rng.integers(0, 2, 9)
        w = random_weights(rng, 9)
        assert join_counts(ObservationColumn.binary(x), w) == join_counts(ObservationColumn.categorical(x, k=2), w)


def _sym(r, n):
    a = r.uniform(0, 5, (n, n))
    a = a + a.T
    np.fill_diagonal(a, 0)
    return a


class TestMantel:
    def test_identical_and_affine(self, rng):
        D = _sym(rng, 6)
        assert mantel(D, D).r == pytest.approx(1.0)
        assert mantel(D, 3 * D + 2).r == pytest.approx(1.0)

    def test_collinear_example(self):
        Dx = np.abs(np.subtract.outer([0.0, 1.0, 3.0], [0.0, 1.0, 3.0]))
        Dy = linguistic_distance(ObservationColumn.frequency([0.0, 0.1, 0.3]))
        assert mantel(Dx, Dy).r == pytest.approx(1.0, abs=1e-12)

    def test_against_pearsonr(self, rng):
        Dx, Dy = _sym(rng, 8), _sym(rng, 8)
        iu = np.triu_indices(8, 1)
        res = mantel(Dx, Dy)
        assert res.r == pytest.approx(stats.pearsonr(Dx[iu], Dy[iu]).statistic, abs=1e-12)
        assert res.pairs_used == 28

    def test_errors(self):
        with pytest.raises(ValueError, match="zero variance in distances"):
            mantel(np.ones((3, 3)) - np.eye(3), _sym(np.random.default_rng(0), 3))
        with pytest.raises(ValueError):
            mantel(np.zeros((2, 2)), np.zeros((2, 2)))

    @given(st.integers(3, 10), st.integers(0, 2**32 - 1), st.floats(-10, 10))
    def test_offset_invariance(self, n, seed, c):
        r = np.random.default_rng(seed)
        Dx, Dy = _sym(r, n), _sym(r, n)
        off = c * (1 - np.eye(n))
        assert mantel(Dx + off, Dy).r == pytest.approx(mantel(Dx, Dy).r, abs=1e-10)
        assert mantel(Dx, Dy + off).r == pytest.approx(mantel(Dx, Dy).r, abs=1e-10)


class TestLinguisticDistance:
    def test_discrete(self):
        d = linguistic_distance(ObservationColumn.categorical([0, 1, 0]))
        assert d.tolist() == [[0, 1, 0], [1, 0, 1], [0, 1, 0]]

    def test_scalar_frequency(self):
        assert linguistic_distance(ObservationColumn.frequency([0.2, 0.7]))[0, 1] == pytest.approx(0.5)

    def test_simplex(self):
        d = linguistic_distance(ObservationColumn.frequency([[1.0, 0, 0], [0, 1.0, 0]]))
        assert d[0, 1] == pytest.approx(np.sqrt(2))
