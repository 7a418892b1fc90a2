"""Series CSV, model files and results CSV."""
from __future__ import annotations

import csv
import math
from typing import Optional

import numpy as np

from ..gp import TimeSeries
from ..kernels import GsmModel, InvalidSpecError, SubKernelGrid

__all__ = [
    "DataError", "load_series", "write_series", "save_model", "load_model",
    "RESULTS_HEADER", "format_float",
]

RESULTS_HEADER = ("run", "seed", "mse", "nll", "iters", "nnz", "failed", "wall_ms")


class DataError(ValueError):
    """Malformed data or model file."""


def format_float(x) -> str:
    """Shortest round-trip decimal; ``nan``/``inf`` spelled out."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def load_series(path, train_len: Optional[int] = None, test_len: int = 20) -> TimeSeries:
    """Read a ``t,y`` CSV and split off the trailing ``test_len`` points.

    Times must be strictly increasing; they are re-indexed to ``1..N``.  With
    ``train_len`` given, only the last ``train_len + test_len`` rows are used.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        if [h.strip() for h in header] != ["t", "y"]:
            raise DataError(f"{path}:1: expected header 't,y'")
        ts, ys = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                t, y = float(row[0]), float(row[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric value") from None
            if not (math.isfinite(t) and math.isfinite(y)):
                raise DataError(f"{path}:{lineno}: non-finite value")
            if ts and t == ts[-1]:
                raise DataError(f"{path}:{lineno}: duplicate t={row[0].strip()}")
            if ts and t < ts[-1]:
                raise DataError(f"{path}:{lineno}: rows are not sorted by t")
            ts.append(t)
            ys.append(y)
    if not ys:
        raise DataError(f"{path}: no data rows")
    total = len(ys)
    if test_len < 1 or test_len >= total:
        raise DataError(f"{path}: test length {test_len} leaves no training data")
    if train_len is None:
        train_len = total - test_len
    if train_len < 1 or train_len + test_len > total:
        raise DataError(f"{path}: {total} rows cannot hold {train_len} train + {test_len} test")
    values = np.array(ys[total - train_len - test_len:], dtype=float)
    return TimeSeries(np.arange(1, values.size + 1), values, train_len)


def write_series(path, series: TimeSeries):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("t,y\n")
        for t, y in zip(series.times, series.values):
            fh.write(f"{int(t)},{format_float(y)}\n")


def save_model(path, model: GsmModel):
    """One ``mu sigma alpha`` line per grid, then ``noise_var v``."""
    with open(path, "w", encoding="utf-8") as fh:
        for g, a in zip(model.grids, model.alpha):
            fh.write(f"{g.mu!r} {g.sigma!r} {float(a)!r}\n")
        fh.write(f"noise_var {model.noise_var!r}\n")


def load_model(path) -> GsmModel:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from None
    grids, alpha, noise = [], [], None
    for lineno, line in enumerate(lines, start=1):
        parts = line.split()
        if not parts:
            continue
        if noise is not None:
            raise DataError(f"{path}:{lineno}: content after the noise_var line")
        if parts[0] == "noise_var":
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 'noise_var v'")
            try:
                noise = float(parts[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric noise variance") from None
            if not (math.isfinite(noise) and noise >= 0):
                raise DataError(f"{path}:{lineno}: noise variance must be finite and nonnegative")
            continue
        if len(parts) != 3:
            raise DataError(f"{path}:{lineno}: expected 'mu sigma alpha'")
        try:
            mu, sigma, a = (float(p) for p in parts)
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-numeric field") from None
        if not (math.isfinite(a) and a >= 0):
            raise DataError(f"{path}:{lineno}: weight must be finite and nonnegative")
        try:
            grids.append(SubKernelGrid(mu, sigma))
        except InvalidSpecError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
        alpha.append(a)
    if noise is None:
        raise DataError(f"{path}: missing final 'noise_var' line")
    return GsmModel(grids, np.array(alpha, dtype=float), noise)
