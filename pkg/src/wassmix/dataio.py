"""CSV and model-file formats used by the command-line interface.

Covariates: header ``x1,...,xp``, one row per sample.
Quantiles:  header ``q_<level>,...`` with strictly increasing levels, one
            monotone row per sample.
Raw points: long format with header ``sample_id,value`` and consecutive
            0-based sample ids.
Trace:      header ``iteration,train_loss,val_loss``.

All floats are written with ``repr`` so files are lossless and reruns are
byte-identical; read errors carry file and line diagnostics.
"""

from __future__ import annotations

import csv
import math

import numpy as np

from .distributions import LevelGrid, QuantileFunction
from .errors import InvalidInputError


def _fmt(v: float) -> str:
    return repr(float(v))


def _parse_float(text: str, path, lineno: int, col: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise InvalidInputError(f"{path}:{lineno}: cannot parse {col}={text!r} as a number")
    if math.isnan(v):
        raise InvalidInputError(f"{path}:{lineno}: NaN value in column {col}")
    return v


def write_covariates_csv(path, X: np.ndarray):
    X = np.asarray(X, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j + 1}" for j in range(X.shape[1])])
        for row in X:
            writer.writerow([_fmt(v) for v in row])


def read_covariates_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidInputError(f"{path}: empty file")
        expected = [f"x{j + 1}" for j in range(len(header))]
        if header != expected:
            raise InvalidInputError(f"{path}:1: expected header x1..xp, got {header!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InvalidInputError(
                    f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}"
                )
            rows.append([_parse_float(c, path, lineno, header[j]) for j, c in enumerate(row)])
    return np.array(rows, dtype=np.float64).reshape(len(rows), len(header))


def write_quantiles_csv(path, levels: np.ndarray, Q: np.ndarray):
    Q = np.asarray(Q, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"q_{_fmt(lv)}" for lv in levels])
        for row in Q:
            writer.writerow([_fmt(v) for v in row])


def read_quantiles_csv(path):
    """Returns (LevelGrid, (n, L) matrix); validates monotone rows."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidInputError(f"{path}: empty file")
        levels = []
        for col in header:
            if not col.startswith("q_"):
                raise InvalidInputError(f"{path}:1: expected q_<level> columns, got {col!r}")
            levels.append(_parse_float(col[2:], path, 1, col))
        try:
            grid = LevelGrid(np.array(levels))
        except InvalidInputError as exc:
            raise InvalidInputError(f"{path}:1: bad level header: {exc}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InvalidInputError(
                    f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}"
                )
            vals = [_parse_float(c, path, lineno, header[j]) for j, c in enumerate(row)]
            if np.any(np.diff(vals) < 0.0):
                raise InvalidInputError(f"{path}:{lineno}: quantile row is not monotone")
            rows.append(vals)
    return grid, np.array(rows, dtype=np.float64).reshape(len(rows), len(grid))


def quantile_rows_to_functions(grid: LevelGrid, Q: np.ndarray) -> list[QuantileFunction]:
    return [QuantileFunction(grid, row) for row in Q]


def write_points_csv(path, samples):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "value"])
        for i, pts in enumerate(samples):
            for v in np.asarray(pts, dtype=np.float64):
                writer.writerow([i, _fmt(v)])


def read_points_csv(path) -> list[np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidInputError(f"{path}: empty file")
        if header != ["sample_id", "value"]:
            raise InvalidInputError(f"{path}:1: expected header sample_id,value")
        groups: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise InvalidInputError(f"{path}:{lineno}: expected 2 cells")
            try:
                sid = int(row[0])
            except ValueError:
                raise InvalidInputError(f"{path}:{lineno}: bad sample_id {row[0]!r}")
            if sid == len(groups):
                groups.append([])
            elif sid != len(groups) - 1:
                raise InvalidInputError(
                    f"{path}:{lineno}: sample ids must be consecutive starting at 0"
                )
            groups[sid].append(_parse_float(row[1], path, lineno, "value"))
    return [np.array(g, dtype=np.float64) for g in groups]


def write_trace_csv(path, trace):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "train_loss", "val_loss"])
        for it, tl, vl in trace:
            writer.writerow([it, _fmt(tl), _fmt(vl)])
