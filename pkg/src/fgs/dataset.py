"""Data ingestion, deterministic splitting and preprocessing."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class Dataset:
    """Feature matrix ``features`` (n x d) with response ``response`` (n,)."""

    features: np.ndarray
    response: np.ndarray
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        X = np.array(self.features, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.array(self.response, dtype=float).reshape(-1)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError(f"features must be a non-empty n x d matrix, got shape {X.shape}")
        if y.shape[0] != X.shape[0]:
            raise DataError(f"response length {y.shape[0]} != number of rows {X.shape[0]}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("features and response must be finite")
        names = tuple(self.feature_names) or tuple(f"x{j + 1}" for j in range(X.shape[1]))
        if len(names) != X.shape[1] or len(set(names)) != len(names):
            raise DataError(f"need {X.shape[1]} unique feature names, got {names!r}")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=int)
        return Dataset(self.features[rows], self.response[rows], self.feature_names)

    def with_response(self, response) -> "Dataset":
        return Dataset(self.features, response, self.feature_names)


@dataclass(frozen=True)
class SplitPlan:
    part_assignments: np.ndarray
    num_parts: int
    seed: int

    def rows(self, part: int) -> np.ndarray:
        return np.flatnonzero(self.part_assignments == part)


@dataclass(frozen=True)
class ScalingParams:
    """Per-feature ``(log?) -> (v - shift) / scale`` transform."""

    shift: np.ndarray
    scale: np.ndarray
    log_applied: tuple[bool, ...]
    response_log: bool = False

    def apply(self, X) -> np.ndarray:
        X = np.array(X, dtype=float, ndmin=2)
        logs = np.array(self.log_applied, dtype=bool)
        if np.any(X[:, logs] <= 0):
            raise DataError("non-positive value in a log-transformed column")
        X[:, logs] = np.log(X[:, logs])
        return (X - self.shift) / self.scale

    def invert(self, Z) -> np.ndarray:
        X = np.array(Z, dtype=float, ndmin=2) * self.scale + self.shift
        logs = np.array(self.log_applied, dtype=bool)
        X[:, logs] = np.exp(X[:, logs])
        return X

    def invert_response(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return np.exp(y) if self.response_log else y

    def to_dict(self) -> dict:
        return {
            "shift": self.shift.tolist(),
            "scale": self.scale.tolist(),
            "log_applied": list(self.log_applied),
            "response_log": self.response_log,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ScalingParams":
        return cls(
            np.asarray(doc["shift"], dtype=float),
            np.asarray(doc["scale"], dtype=float),
            tuple(bool(v) for v in doc["log_applied"]),
            bool(doc.get("response_log", False)),
        )


def load_csv(path, target: str, features: Sequence[str] | None = None) -> Dataset:
    """Read a headered CSV into a :class:`Dataset`, keeping rows in file order."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        if target not in header:
            raise DataError(f"{path}: target column {target!r} not found")
        if features is None:
            features = [h for h in header if h != target]
        missing = [f for f in features if f not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {missing}")
        cols = [header.index(f) for f in features]
        tcol = header.index(target)
        X, y = [], []
        for rowno, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {rowno} has {len(row)} fields, expected {len(header)}")
            X.append([_cell(row, c, rowno, header[c], path) for c in cols])
            y.append(_cell(row, tcol, rowno, target, path))
    if not y:
        raise DataError(f"{path}: no data rows")
    return Dataset(np.array(X, dtype=float).reshape(len(y), len(cols)), np.array(y), tuple(features))


def _cell(row, col, rowno, name, path) -> float:
    text = row[col].strip()
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"{path}: row {rowno}, column {name!r}: non-numeric or missing value {text!r}") from None
    if not math.isfinite(value):
        raise DataError(f"{path}: row {rowno}, column {name!r}: non-finite value {text!r}")
    return value


def save_csv(data: Dataset, path, target: str = "y") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([*data.feature_names, target])
        for xrow, yv in zip(data.features, data.response):
            writer.writerow([repr(float(v)) for v in xrow] + [repr(float(yv))])


def split_plan(n: int, num_parts: int, seed: int) -> SplitPlan:
    # seeded permutation cut into contiguous blocks; the remainder goes to the earliest parts
    if num_parts not in (2, 4):
        raise DataError(f"num_parts must be 2 or 4, got {num_parts}")
    if n < num_parts:
        raise DataError(f"cannot split {n} rows into {num_parts} parts")
    perm = np.random.default_rng(seed).permutation(n)
    sizes = [n // num_parts + (1 if k < n % num_parts else 0) for k in range(num_parts)]
    assign = np.empty(n, dtype=int)
    start = 0
    for k, size in enumerate(sizes):
        assign[perm[start:start + size]] = k
        start += size
    return SplitPlan(assign, num_parts, seed)


def split(data: Dataset, num_parts: int, seed: int) -> list[Dataset]:
    plan = split_plan(data.n, num_parts, seed)
    return [data.subset(plan.rows(k)) for k in range(num_parts)]


def standardize(data: Dataset, log_columns: Iterable[str] = (), response_name: str = "y") -> tuple[Dataset, ScalingParams]:
    """Optionally log-transform, then scale each feature to mean 0 / variance 1.

    Variance uses the n denominator. The response is log-transformed only when
    ``response_name`` appears in ``log_columns``; it is never standardized.
    """
    log_columns = set(log_columns)
    unknown = log_columns - set(data.feature_names) - {response_name}
    if unknown:
        raise DataError(f"unknown log column(s): {sorted(unknown)}")
    logs = tuple(name in log_columns for name in data.feature_names)
    X = np.array(data.features)
    for j, flag in enumerate(logs):
        if flag:
            if np.any(X[:, j] <= 0):
                raise DataError(f"column {data.feature_names[j]!r} has non-positive values; cannot take log")
            X[:, j] = np.log(X[:, j])
    y = np.array(data.response)
    response_log = response_name in log_columns
    if response_log:
        if np.any(y <= 0):
            raise DataError(f"response {response_name!r} has non-positive values; cannot take log")
        y = np.log(y)
    shift = X.mean(axis=0)
    scale = X.std(axis=0)
    bad = [data.feature_names[j] for j in np.flatnonzero(scale <= 1e-12 * np.maximum(1.0, np.abs(shift)))]
    if bad:
        raise DataError(f"zero-variance column(s): {bad}")
    params = ScalingParams(shift, scale, logs, response_log)
    return Dataset((X - shift) / scale, y, data.feature_names), params
