import numpy as np
import pytest
from hypothesis import given, strategies as st

from geoling.geometry import PointSet
from geoling.lingdata import (
    METHODS,
    SHAPES,
    Dataset,
    ObservationColumn,
    ParseError,
    applicability,
    format_observations,
    parse_observations,
    residuals,
)


class TestColumns:
    def test_residuals(self):
        assert residuals(ObservationColumn.binary([0, 1])).tolist() == [-0.5, 0.5]
        assert residuals(ObservationColumn.frequency([0.3, 0.3, 0.3])).tolist() == [0, 0, 0]
        r = residuals(ObservationColumn.frequency([0.2, 0.4, 0.9]))
        assert np.allclose(r, [-0.3, -0.1, 0.4], atol=1e-15)

    def test_residuals_need_scalar(self):
        with pytest.raises(ValueError):
            residuals(ObservationColumn.categorical([0, 1, 2]))

    def test_validation(self):
        with pytest.raises(ValueError):
            ObservationColumn.binary([0, 2])
        with pytest.raises(ValueError):
            ObservationColumn.frequency([[0.5, 0.6]])
        with pytest.raises(ValueError):
            ObservationColumn.frequency([1.5, 0.2])
        with pytest.raises(ValueError):
            ObservationColumn.categorical([0, 1], k=1)

    def test_onehot(self):
        z = ObservationColumn.categorical([2, 0, 1, 0]).onehot()
        assert z.tolist() == [[0, 0, 1], [1, 0, 0], [0, 1, 0], [1, 0, 0]]

    def test_dataset_length_mismatch(self):
        with pytest.raises(ValueError):
            Dataset(PointSet([(0, 0), (1, 1)]), ObservationColumn.binary([0, 1, 1]))


class TestApplicability:
    def test_examples(self):
        res = applicability(ObservationColumn.categorical([0, 1, 2]), "moran")
        assert not res and "Moran's I undefined for >2 variants" in res.reason
        assert not applicability(ObservationColumn.frequency([0.1, 0.2]), "joins")
        assert applicability(ObservationColumn.binary([0, 1]), "hsic")

    def test_total(self):
        cols = [
            ObservationColumn.binary([0, 1]),
            ObservationColumn.categorical([0, 1]),
            ObservationColumn.categorical([0, 1, 2]),
            ObservationColumn.frequency([0.1, 0.9]),
            ObservationColumn.frequency([[0.1, 0.9], [0.5, 0.5]]),
        ]
        for col in cols:
            for m in METHODS:
                res = applicability(col, m)
                assert isinstance(res.accepted, bool) and res.reason
        with pytest.raises(ValueError):
            applicability(cols[0], "kriging")


class TestParsing:
    def test_binary_with_dropped_rows(self):
        ds, dropped = parse_observations("x,y,value\n0,0,1\n1,1,\n2,2,0\n", "binary")
        assert dropped == 1
        assert ds.column.values.tolist() == [1, 0]
        assert ds.points.coords.tolist() == [[0, 0], [2, 2]]

    def test_categorical_first_appearance(self):
        ds, _ = parse_observations("x,y,value\n0,0,zij\n1,0,hun\n2,0,zij\n3,0,ze\n", "categorical")
        assert ds.column.labels == ("zij", "hun", "ze")
        assert ds.column.values.tolist() == [0, 1, 0, 2]

    def test_frequency_forms(self):
        ds, _ = parse_observations("x,y,freq\n0,0,0.25\n1,0,0.5\n", "frequency")
        assert ds.column.k == 1
        ds, _ = parse_observations("x,y,f0,f1,f2\n0,0,0.2,0.3,0.5\n1,0,1,0,0\n", "frequency")
        assert ds.column.k == 3

    @pytest.mark.parametrize(
        "text,shape",
        [
            ("", "binary"),
            ("x,value\n0,1\n1,0\n", "binary"),
            ("x,y,value\n0,0,1\n", "binary"),
            ("x,y,value\n0,0,1\n1,1,2\n", "binary"),
            ("x,y,value\na,0,1\n1,1,0\n", "binary"),
            ("x,y,value\n0,0,a\n1,1,a\n", "categorical"),
            ("x,y,value\n0,0,0.5\n1,1,0.5\n", "frequency"),
            ("x,y,f0,f1\n0,0,0.5,0.6\n1,1,0.5,0.5\n", "frequency"),
        ],
    )
    def test_errors(self, text, shape):
        with pytest.raises(ParseError):
            parse_observations(text, shape)


coords = st.floats(-1e6, 1e6, allow_nan=False)


@st.composite
def datasets(draw):
    n = draw(st.integers(2, 25))
    xy = np.array([[draw(coords), draw(coords)] for _ in range(n)])
    shape = draw(st.sampled_from(SHAPES))
    if shape == "binary":
        col = ObservationColumn.binary(draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)))
    elif shape == "categorical":
        labels = draw(st.lists(st.text("abcxyz", min_size=1, max_size=4), min_size=2, max_size=4, unique=True))
        vals = draw(st.lists(st.integers(0, len(labels) - 1), min_size=n, max_size=n))
        # relabel to first-appearance order, which is what parsing produces
        order = list(dict.fromkeys(vals))
        if len(order) < 2:
            vals = [0, 1] * (n // 2) + [0] * (n % 2)
            order = [0, 1]
        remap = {v: i for i, v in enumerate(order)}
        col = ObservationColumn.categorical(
            [remap[v] for v in vals], k=len(order), labels=[labels[v] for v in order]
        )
    else:
        k = draw(st.integers(1, 4))
        raw = np.array(draw(st.lists(st.lists(st.floats(0.01, 1), min_size=k, max_size=k), min_size=n, max_size=n)))
        if k == 1:
            col = ObservationColumn.frequency(raw[:, 0])
        else:
            col = ObservationColumn.frequency(raw / raw.sum(axis=1, keepdims=True))
    return Dataset(PointSet(xy), col)


@given(datasets())
def test_serialization_round_trip(ds):
    back, dropped = parse_observations(format_observations(ds), ds.column.shape)
    assert dropped == 0
    assert np.array_equal(back.points.coords, ds.points.coords)
    if ds.column.discrete:
        assert np.array_equal(back.column.values, ds.column.values)
        assert back.column.labels == ds.column.labels or ds.column.shape == "binary"
    else:
        assert np.max(np.abs(back.column.values - ds.column.values)) <= 1e-12
