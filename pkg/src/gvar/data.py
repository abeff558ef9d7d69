"""Time-series containers and CSV input/output."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from gvar.errors import DimensionError, ParseError


@dataclass
class TimeSeries:
    """A ``T x p`` observation matrix with variable names and provenance."""

    values: np.ndarray
    names: list = field(default_factory=list)
    seed: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DimensionError(f"time series must be 2-D (T x p), got shape {self.values.shape}")
        if not self.names:
            self.names = [f"x{j}" for j in range(self.p)]
        if len(self.names) != self.p:
            raise DimensionError(f"{len(self.names)} names for {self.p} variables")

    @property
    def T(self):
        return self.values.shape[0]

    @property
    def p(self):
        return self.values.shape[1]

    def reversed(self):
        """The exact time reversal ``x~_t = x_{T+1-t}``."""
        return TimeSeries(self.values[::-1].copy(), list(self.names), self.seed)


@dataclass
class GroundTruth:
    """Summary-graph adjacency and effect signs, indexed ``[source, target]``."""

    adjacency: np.ndarray
    sign: np.ndarray
    coefficients: np.ndarray | None = None

    def __post_init__(self):
        self.adjacency = np.asarray(self.adjacency, dtype=int)
        self.sign = np.asarray(self.sign, dtype=int)
        if self.adjacency.shape != self.sign.shape or self.adjacency.ndim != 2:
            raise DimensionError("adjacency and sign must be equal-shaped square matrices")


def as_array(series):
    if isinstance(series, TimeSeries):
        return series.values
    arr = np.asarray(series, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"expected a T x p array, got shape {arr.shape}")
    return arr


def load_csv(path):
    """Read a rectangular numeric CSV (header row of names, one row per time step)."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if not header or any(h == "" for h in header):
        raise ParseError(f"{path}: header row has empty variable names", row=1)
    width = len(header)
    values = []
    for r, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != width:
            raise ParseError(f"{path}: row {r} has {len(row)} cells, expected {width}", row=r)
        parsed = []
        for c, cell in enumerate(row, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"{path}: non-numeric cell {cell!r} at row {r}, column {c}",
                                 row=r, column=c) from None
            if not math.isfinite(v):
                raise ParseError(f"{path}: non-finite cell {cell!r} at row {r}, column {c}",
                                 row=r, column=c)
            parsed.append(v)
        values.append(parsed)
    if not values:
        raise ParseError(f"{path}: no data rows")
    return TimeSeries(np.array(values), header)


def write_csv(path, series):
    """Write a series with ``repr``-precision floats so a reload is exact."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(series.names)
        for row in series.values:
            writer.writerow([repr(float(v)) for v in row])


def write_matrix(path, matrix, fmt=None):
    """Headerless matrix CSV; integers are written as integers."""
    matrix = np.asarray(matrix)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in np.atleast_2d(matrix):
            if fmt is not None:
                writer.writerow([fmt(v) for v in row])
            elif np.issubdtype(matrix.dtype, np.integer):
                writer.writerow([int(v) for v in row])
            else:
                writer.writerow([repr(float(v)) for v in row])


def read_matrix(path, dtype=float):
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    try:
        return np.array([[float(c) for c in row] for row in rows]).astype(dtype)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


def write_truth(directory, truth):
    directory = Path(directory)
    write_matrix(directory / "truth_adjacency.csv", truth.adjacency.astype(int))
    write_matrix(directory / "truth_sign.csv", truth.sign.astype(int))


def read_truth(directory):
    directory = Path(directory)
    adj = directory / "truth_adjacency.csv"
    if not adj.exists():
        return None
    sign_path = directory / "truth_sign.csv"
    adjacency = read_matrix(adj, int)
    sign = read_matrix(sign_path, int) if sign_path.exists() else np.zeros_like(adjacency)
    return GroundTruth(adjacency, sign)
