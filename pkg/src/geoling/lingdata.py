"""Linguistic observation columns, datasets and the observations CSV format.

A column holds one value per location in one of three shapes:

* ``binary``: presence/absence, values in {0, 1};
* ``categorical``: a variant index in ``[0, k)``, with optional labels;
* ``frequency``: a length-``k`` vector of relative frequencies per location.
  ``k == 1`` is a bare relative frequency in [0, 1]; ``k >= 2`` rows lie on
  the simplex.

The observations file is UTF-8 CSV with a header row and columns ``x``,
``y`` plus ``value`` (binary, categorical) or ``freq`` / ``f0..f{k-1}``
(frequency). Rows with an empty cell in a used column are dropped.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .geometry import PointSet

SHAPES = ("binary", "categorical", "frequency")
METHODS = ("hsic", "moran", "mantel", "joins")

_SIMPLEX_TOL = 1e-6


class ParseError(ValueError):
    """Raised when an observations file cannot be read."""


@dataclass(frozen=True)
class ObservationColumn:
    shape: str
    values: np.ndarray
    k: int
    labels: tuple | None = None

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.shape == "frequency":
            v = np.array(self.values, dtype=float)
            if v.ndim == 1:
                v = v[:, None]
            if v.ndim != 2 or v.shape[1] != self.k or self.k < 1:
                raise ValueError(f"frequency values must have shape (n, {self.k})")
            if not np.all(np.isfinite(v)) or v.min() < 0 or v.max() > 1:
                raise ValueError("frequency components must lie in [0, 1]")
            if self.k >= 2 and np.abs(v.sum(axis=1) - 1).max() > _SIMPLEX_TOL:
                raise ValueError("frequency vectors must sum to 1")
        else:
            v = np.array(self.values)
            if v.ndim != 1:
                raise ValueError("discrete values must be one-dimensional")
            if v.size and not np.all(v == np.round(v)):
                raise ValueError("discrete values must be integers")
            v = v.astype(np.int64)
            if self.shape == "binary" and self.k != 2:
                raise ValueError("binary columns have k = 2")
            if self.k < 2:
                raise ValueError("categorical columns need k >= 2")
            if v.size and (v.min() < 0 or v.max() >= self.k):
                raise ValueError(f"variant indices must lie in [0, {self.k})")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def binary(cls, values):
        return cls("binary", np.asarray(values), 2)

    @classmethod
    def categorical(cls, values, k=None, labels=None):
        values = np.asarray(values)
        if k is None:
            k = len(labels) if labels is not None else int(values.max()) + 1
        return cls("categorical", values, int(k), tuple(labels) if labels is not None else None)

    @classmethod
    def frequency(cls, values):
        v = np.asarray(values, dtype=float)
        k = 1 if v.ndim == 1 else v.shape[1]
        return cls("frequency", v, k)

    def __len__(self):
        return self.values.shape[0]

    @property
    def discrete(self) -> bool:
        return self.shape != "frequency"

    @property
    def scalar(self) -> bool:
        """True when every location carries one real number (binary, k=1 frequency)."""
        return self.shape == "binary" or (self.shape == "frequency" and self.k == 1)

    def take(self, index) -> "ObservationColumn":
        return ObservationColumn(self.shape, self.values[np.asarray(index)], self.k, self.labels)

    def as_real(self) -> np.ndarray:
        """Scalar values as a float vector (binary, two-variant categorical, k=1 frequency)."""
        if self.shape == "frequency":
            if self.k != 1:
                raise ValueError("a frequency column with k > 1 has no scalar value")
            return self.values[:, 0].astype(float)
        if self.k != 2:
            raise ValueError(f"a categorical column with {self.k} variants has no scalar value")
        return self.values.astype(float)

    def onehot(self) -> np.ndarray:
        """``(n, k)`` indicator matrix of a discrete column."""
        if not self.discrete:
            raise ValueError("one-hot encoding needs a discrete column")
        z = np.zeros((len(self), self.k))
        z[np.arange(len(self)), self.values] = 1.0
        return z


@dataclass(frozen=True)
class Dataset:
    points: PointSet
    column: ObservationColumn
    variable_name: str = "x"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.points) != len(self.column):
            raise ValueError(
                f"{len(self.points)} locations but {len(self.column)} observations"
            )

    def __len__(self):
        return len(self.column)


def residuals(col: ObservationColumn) -> np.ndarray:
    """Deviations from the mean, ``r_i = x_i - mean(x)``."""
    try:
        x = col.as_real()
    except ValueError as exc:
        raise ValueError(f"residuals undefined: {exc}") from None
    return x - x.mean()


class Applicability(NamedTuple):
    accepted: bool
    reason: str

    def __bool__(self):
        return self.accepted


def applicability(col: ObservationColumn, method: str) -> Applicability:
    """Whether ``method`` can be run on ``col``.

    Moran's I needs one real number per location; join counts need discrete
    labels; HSIC and Mantel take every shape.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if method == "moran":
        if col.shape == "categorical" and col.k > 2:
            return Applicability(False, f"Moran's I undefined for >2 variants (column has {col.k})")
        if col.shape == "frequency" and col.k > 1:
            return Applicability(
                False, f"Moran's I undefined for >2 variants (frequency vectors of length {col.k})"
            )
    if method == "joins" and col.shape == "frequency":
        return Applicability(False, "join counts are not applicable to frequency data")
    return Applicability(True, "ok")


# -- observations CSV -------------------------------------------------------


def _value_columns(header, shape):
    if shape != "frequency":
        if "value" not in header:
            raise ParseError("missing 'value' column")
        return ["value"]
    if "freq" in header:
        return ["freq"]
    cols = []
    while f"f{len(cols)}" in header:
        cols.append(f"f{len(cols)}")
    if not cols:
        raise ParseError("frequency data needs a 'freq' column or columns f0..f{k-1}")
    return cols


def parse_observations(text: str, shape: str, metric: str = "euclidean", name: str = "x"):
    """Parse observations CSV text. Returns ``(dataset, n_dropped)``."""
    if shape not in SHAPES:
        raise ParseError(f"unknown shape {shape!r}")
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames
    if not header:
        raise ParseError("empty file or missing header row")
    header = [h.strip() for h in header]
    reader.fieldnames = header
    for c in ("x", "y"):
        if c not in header:
            raise ParseError(f"missing '{c}' column")
    vcols = _value_columns(header, shape)
    used = ["x", "y", *vcols]

    coords, raw, dropped = [], [], 0
    for lineno, row in enumerate(reader, start=2):
        cells = [(row.get(c) or "").strip() for c in used]
        if any(c == "" for c in cells):
            dropped += 1
            continue
        try:
            coords.append((float(cells[0]), float(cells[1])))
        except ValueError:
            raise ParseError(f"line {lineno}: coordinates are not numbers") from None
        raw.append(cells[2:])
    if len(raw) < 2:
        raise ParseError(f"need at least 2 complete rows, found {len(raw)}")

    try:
        points = PointSet(np.array(coords), metric)
    except ValueError as exc:
        raise ParseError(str(exc)) from None

    try:
        if shape == "binary":
            vals = []
            for cell, in raw:
                if cell not in ("0", "1"):
                    raise ParseError(f"binary values must be 0 or 1, got {cell!r}")
                vals.append(int(cell))
            column = ObservationColumn.binary(vals)
        elif shape == "categorical":
            labels: dict[str, int] = {}
            vals = [labels.setdefault(cell, len(labels)) for cell, in raw]
            if len(labels) < 2:
                raise ParseError("categorical data needs at least 2 distinct variants")
            column = ObservationColumn.categorical(vals, k=len(labels), labels=list(labels))
        else:
            try:
                v = np.array([[float(c) for c in cells] for cells in raw])
            except ValueError:
                raise ParseError("frequency cells must be numbers") from None
            column = ObservationColumn.frequency(v if len(vcols) > 1 else v[:, 0])
    except ParseError:
        raise
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    return Dataset(points, column, name), dropped


def read_observations(path, shape: str, metric: str = "euclidean", name: str | None = None):
    """Read an observations CSV file. Returns ``(dataset, n_dropped)``."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    return parse_observations(text, shape, metric, name or str(path))


def format_observations(ds: Dataset) -> str:
    """Serialize a dataset to observations CSV text (floats written with ``repr``)."""
    col = ds.column
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if col.shape == "frequency":
        vnames = ["freq"] if col.k == 1 else [f"f{j}" for j in range(col.k)]
    else:
        vnames = ["value"]
    writer.writerow(["x", "y", *vnames])
    for (x, y), v in zip(ds.points.coords, col.values):
        if col.shape == "frequency":
            cells = [repr(float(c)) for c in v]
        elif col.shape == "categorical" and col.labels is not None:
            cells = [str(col.labels[v])]
        else:
            cells = [str(int(v))]
        writer.writerow([repr(float(x)), repr(float(y)), *cells])
    return buf.getvalue()


def write_observations(ds: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_observations(ds))
