"""Tabular sample sets with named columns.

CSV layout: one header row naming the variables, one row per observation.
Units, when known, are kept as metadata on the object only.
"""

import csv
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import InputError


@dataclass(frozen=True, eq=False)
class SampleSet:
    columns: tuple[str, ...]
    data: np.ndarray  # (n_rows, n_columns)
    units: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        cols = tuple(str(c) for c in self.columns)
        arr = np.array(self.data, dtype=float)
        if arr.ndim != 2:
            raise InputError("sample data must be a 2-d array")
        if arr.shape[1] != len(cols):
            raise InputError(f"{len(cols)} column names for {arr.shape[1]} data columns")
        if len(set(cols)) != len(cols):
            raise InputError(f"duplicate column names in {cols}")
        arr.setflags(write=False)
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "units", dict(self.units))

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.data[:, self.columns.index(name)]
        except ValueError:
            raise InputError(f"no column {name!r}; have {self.columns}") from None

    def block(self, prefix: str) -> np.ndarray:
        """Columns named ``prefix`` or ``prefix_<suffix>``, in file order."""
        idx = [i for i, c in enumerate(self.columns) if c == prefix or c.startswith(prefix + "_")]
        if not idx:
            raise InputError(f"no columns with prefix {prefix!r}; have {self.columns}")
        return self.data[:, idx]

    def head(self, n: int) -> "SampleSet":
        return SampleSet(self.columns, self.data[:n], units=self.units)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            writer.writerows(self.data.tolist())

    @classmethod
    def from_csv(cls, path) -> "SampleSet":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise InputError(f"{path}: empty CSV") from None
            rows = [[float(v) for v in row] for row in reader if row]
        data = np.asarray(rows, dtype=float) if rows else np.empty((0, len(header)))
        return cls(tuple(header), data)
