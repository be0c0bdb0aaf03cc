"""Sample containers and the CSV formats for user data."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lattice import Pattern

MISSING_TOKENS = ("", "NA")


class CsvFormatError(ValueError):
    """Malformed input CSV; the message names the offending row and column."""


@dataclass(frozen=True)
class LabeledSample:
    x: tuple
    y: int


@dataclass(frozen=True)
class MaskedSample:
    """Training triple: features with unobserved entries zeroed, label, pattern."""

    x_masked: tuple
    y: int
    o: Pattern

    def __post_init__(self):
        if len(self.x_masked) != self.o.d:
            raise ValueError("feature vector and pattern lengths differ")
        for j, v in enumerate(self.x_masked):
            if not (self.o.mask >> j) & 1 and v != 0:
                raise ValueError(f"unobserved coordinate {j + 1} must be stored as 0")
        if self.y not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.y!r}")


@dataclass
class TrainingArrays:
    """Columnar view of a training set: X (n, d) masked, y (n,), masks (n,)."""

    X: np.ndarray
    y: np.ndarray
    masks: np.ndarray
    d: int

    def __len__(self):
        return len(self.y)

    def samples(self) -> list[MaskedSample]:
        return [
            MaskedSample(tuple(map(float, x)), int(y), Pattern(int(m), self.d))
            for x, y, m in zip(self.X, self.y, self.masks)
        ]


def training_arrays(train) -> TrainingArrays:
    """Accept a TrainingArrays or a sequence of MaskedSample."""
    if isinstance(train, TrainingArrays):
        return train
    train = list(train)
    if not train:
        raise ValueError("empty training set")
    d = train[0].o.d
    if any(s.o.d != d for s in train):
        raise ValueError("training samples disagree on the dimension")
    X = np.array([s.x_masked for s in train], dtype=np.float64).reshape(len(train), d)
    y = np.array([s.y for s in train], dtype=np.int64)
    masks = np.array([s.o.mask for s in train], dtype=np.int64)
    return TrainingArrays(X, y, masks, d)


def mask_matrix(masks: np.ndarray, d: int) -> np.ndarray:
    """Boolean (n, d) observation matrix from integer masks."""
    return ((np.asarray(masks)[:, None] >> np.arange(d)) & 1).astype(bool)


def masks_from_matrix(observed: np.ndarray) -> np.ndarray:
    observed = np.asarray(observed, dtype=np.int64)
    return (observed << np.arange(observed.shape[1])).sum(axis=1)


def _header(reader, path, want_label: bool) -> int:
    try:
        header = next(reader)
    except StopIteration:
        raise CsvFormatError(f"{path}: empty file") from None
    header = [h.strip() for h in header]
    feats = header[:-1] if want_label else header
    expected = [f"x{j + 1}" for j in range(len(feats))]
    if not feats or feats != expected or (want_label and header[-1] != "y"):
        tail = ",y" if want_label else ""
        raise CsvFormatError(f"{path}: row 1: header must be x1,...,xd{tail}, got {','.join(header)}")
    return len(feats)


def _parse_float(cell: str, path, row: int, col: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise CsvFormatError(f"{path}: row {row}, column {col}: not a number: {cell!r}") from None
    if not math.isfinite(v):
        raise CsvFormatError(f"{path}: row {row}, column {col}: non-finite value {cell!r}")
    return v


def read_train_csv(path) -> TrainingArrays:
    """Read ``x1,...,xd,y`` where missing features are empty cells or ``NA``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        d = _header(reader, path, want_label=True)
        X, y, obs = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise CsvFormatError(f"{path}: row {lineno}: expected {d + 1} fields, got {len(row)}")
            xs, seen = [], []
            for j, cell in enumerate(row[:d]):
                cell = cell.strip()
                if cell in MISSING_TOKENS:
                    xs.append(0.0)
                    seen.append(False)
                else:
                    xs.append(_parse_float(cell, path, lineno, f"x{j + 1}"))
                    seen.append(True)
            label = row[d].strip()
            if label not in ("0", "1"):
                raise CsvFormatError(f"{path}: row {lineno}, column y: label must be 0 or 1, got {label!r}")
            X.append(xs)
            y.append(int(label))
            obs.append(seen)
    if not y:
        raise CsvFormatError(f"{path}: no data rows")
    obs = np.array(obs, dtype=bool)
    return TrainingArrays(np.array(X, dtype=np.float64), np.array(y, dtype=np.int64),
                          masks_from_matrix(obs), d)


def read_test_csv(path, d: int | None = None) -> np.ndarray:
    """Read fully observed ``x1,...,xd`` rows."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        dd = _header(reader, path, want_label=False)
        if d is not None and dd != d:
            raise CsvFormatError(f"{path}: row 1: test data has {dd} features, training data has {d}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dd:
                raise CsvFormatError(f"{path}: row {lineno}: expected {dd} fields, got {len(row)}")
            vals = []
            for j, cell in enumerate(row):
                cell = cell.strip()
                if cell in MISSING_TOKENS:
                    raise CsvFormatError(f"{path}: row {lineno}, column x{j + 1}: test features must be observed")
                vals.append(_parse_float(cell, path, lineno, f"x{j + 1}"))
            rows.append(vals)
    return np.array(rows, dtype=np.float64).reshape(len(rows), dd)


def write_train_csv(fh, data: TrainingArrays) -> None:
    """Export a training set; unobserved cells are written as ``NA``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow([f"x{j + 1}" for j in range(data.d)] + ["y"])
    obs = mask_matrix(data.masks, data.d)
    for x, y, o in zip(data.X, data.y, obs):
        w.writerow([repr(float(v)) if seen else "NA" for v, seen in zip(x, o)] + [int(y)])


def write_test_csv(fh, X: np.ndarray, y: Sequence[int] | None = None) -> None:
    w = csv.writer(fh, lineterminator="\n")
    d = X.shape[1]
    w.writerow([f"x{j + 1}" for j in range(d)] + (["y"] if y is not None else []))
    for i, x in enumerate(X):
        w.writerow([repr(float(v)) for v in x] + ([int(y[i])] if y is not None else []))


def to_csv_string(writer, *args) -> str:
    buf = io.StringIO()
    writer(buf, *args)
    return buf.getvalue()
