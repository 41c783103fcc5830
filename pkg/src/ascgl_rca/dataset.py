"""Aligned multivariate samples for one regime, plus CSV reading and writing."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Union

import numpy as np

from .errors import DuplicateColumn, MissingVertex, NonNumericCell, RaggedRows

NORMAL = "normal"
ANOMALOUS = "anomalous"

_TIMESTAMP_HEADERS = {"", "time", "timestamp", "date", "datetime"}


@dataclass(frozen=True, eq=False)
class RegimeDataset:
    """Sample matrix (rows are sample indices, columns are series)."""

    names: tuple[str, ...]
    values: np.ndarray
    regime: str = NORMAL
    _col: dict = field(init=False, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != len(self.names):
            raise ValueError(f"values must be (n_samples, {len(self.names)}), got {values.shape}")
        if len(set(self.names)) != len(self.names):
            raise DuplicateColumn("duplicate series names")
        values.setflags(write=False)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_col", {n: i for i, n in enumerate(self.names)})

    @classmethod
    def from_columns(cls, columns: Mapping[str, Iterable[float]], regime: str = NORMAL) -> "RegimeDataset":
        names = list(columns)
        arrays = [np.asarray(columns[n], dtype=float) for n in names]
        lengths = {len(a) for a in arrays}
        if len(lengths) > 1:
            raise RaggedRows(f"columns have different lengths {sorted(lengths)}")
        values = np.column_stack(arrays) if arrays else np.empty((0, 0))
        return cls(tuple(names), values, regime)

    def __len__(self):
        return self.values.shape[0]

    def __contains__(self, name):
        return name in self._col

    def __eq__(self, other):
        if not isinstance(other, RegimeDataset):
            return NotImplemented
        return (self.names == other.names and self.regime == other.regime
                and np.array_equal(self.values, other.values))

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self._col[name]]
        except KeyError:
            raise MissingVertex(name, f"{self.regime} dataset") from None

    def require(self, names: Iterable[str]) -> None:
        for n in sorted(names):
            if n not in self._col:
                raise MissingVertex(n, f"{self.regime} dataset")

    def slice(self, start: int, stop: int) -> "RegimeDataset":
        return RegimeDataset(self.names, self.values[start:stop], self.regime)

    def with_regime(self, regime: str) -> "RegimeDataset":
        return RegimeDataset(self.names, self.values, regime)


def parse_timeseries_csv(path: Union[str, Path], regime: str = NORMAL) -> RegimeDataset:
    """Read a comma-separated file whose header names the series.

    A leading timestamp-like column (empty header or one of ``time``,
    ``timestamp``, ``date``, ...) is dropped. Row numbers in error messages
    count the header as row 1.
    """
    with open(path, newline="", encoding="utf-8-sig") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise RaggedRows(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    skip = 1 if header and header[0].lower() in _TIMESTAMP_HEADERS else 0
    names = header[skip:]
    seen = set()
    for n in names:
        if not n:
            raise DuplicateColumn(f"{path}: empty column name in header")
        if n in seen:
            raise DuplicateColumn(f"{path}: column {n!r} appears more than once")
        seen.add(n)

    body = np.empty((len(rows) - 1, len(names)))
    for i, row in enumerate(rows[1:]):
        if len(row) != len(header):
            raise RaggedRows(f"{path}: row {i + 2} has {len(row)} cells, header has {len(header)}")
        for j, cell in enumerate(row[skip:]):
            try:
                x = float(cell)
            except ValueError:
                raise NonNumericCell(i + 2, names[j], cell) from None
            if math.isnan(x):
                raise NonNumericCell(i + 2, names[j], cell)
            body[i, j] = x
    return RegimeDataset(tuple(names), body, regime)


def write_timeseries_csv(data: RegimeDataset, path: Union[str, Path]) -> None:
    """Write ``data`` so that :func:`parse_timeseries_csv` recovers it exactly."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(data.names)
        for row in data.values:
            w.writerow([repr(float(x)) for x in row])
