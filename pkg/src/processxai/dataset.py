"""Loading, checking and partitioning tabular process data.

The on-disk format is a plain CSV with a header row, one product per row and
a binary target column (1 = normal product, 0 = defective product).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

DEFAULT_TARGET = "PassOrFail"

# Controllable injection-molding variables (pressure, temperature, screw speed).
DEFAULT_KEEP = (
    "Max_Screw_RPM",
    "Average_Screw_RPM",
    "Max_Injection_Pressure",
    "Max_Switch_Over_Pressure",
    "Average_Back_Pressure",
    "Barrel_Temperature_1",
    "Barrel_Temperature_2",
    "Barrel_Temperature_3",
    "Barrel_Temperature_4",
    "Barrel_Temperature_5",
    "Barrel_Temperature_6",
    "Barrel_Temperature_7",
    "Hopper_Temperature",
    "Mold_Temperature_3",
    "Mold_Temperature_4",
)


class DatasetError(ValueError):
    """Raised for malformed input data or invalid dataset operations."""


@dataclass(frozen=True, eq=False)
class ProcessDataset:
    """Immutable feature matrix with named columns and a 0/1 target."""

    features: np.ndarray
    feature_names: tuple[str, ...]
    target: np.ndarray
    target_name: str = DEFAULT_TARGET

    def __post_init__(self):
        X = np.array(self.features, dtype=float, copy=True)
        y = np.array(self.target, copy=True)
        names = tuple(str(n) for n in self.feature_names)
        if X.ndim == 1 and X.size == 0:
            X = X.reshape(0, len(names))
        if X.ndim != 2:
            raise DatasetError("feature matrix must be two-dimensional")
        if X.shape[1] != len(names):
            raise DatasetError(
                f"{X.shape[1]} feature columns but {len(names)} feature names"
            )
        if len(set(names)) != len(names):
            raise DatasetError("feature names must be unique")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise DatasetError("target length must equal the number of rows")
        if y.size and not np.all((y == 0) | (y == 1)):
            raise DatasetError("target values must be 0 or 1")
        if not np.all(np.isfinite(X)):
            raise DatasetError("feature matrix contains missing or non-finite values")
        y = y.astype(np.int64)
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "target", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.n_rows

    def column(self, name: str) -> np.ndarray:
        return self.features[:, self.index_of(name)]

    def index_of(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise DatasetError(f"unknown feature {name!r}") from None

    def take(self, rows) -> "ProcessDataset":
        """Row subset (index array or boolean mask), order preserved."""
        rows = np.asarray(rows)
        return ProcessDataset(
            self.features[rows], self.feature_names, self.target[rows], self.target_name
        )

    def class_counts(self) -> tuple[int, int]:
        """(normal, defective) counts."""
        n_normal = int(np.sum(self.target == 1))
        return n_normal, self.n_rows - n_normal

    def equals(self, other: "ProcessDataset") -> bool:
        return (
            self.feature_names == other.feature_names
            and self.target_name == other.target_name
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.target, other.target)
        )


@dataclass(frozen=True)
class QualityReport:
    feature_names: tuple[str, ...]
    missing_count: tuple[int, ...]
    outlier_count: tuple[int, ...]
    total_rows: int
    iqr_k: float = 1.5


@dataclass(frozen=True)
class SplitPair:
    train: ProcessDataset
    test: ProcessDataset
    seed: int
    train_rows: np.ndarray = field(repr=False, default=None)
    test_rows: np.ndarray = field(repr=False, default=None)


def _parse_number(cell: str) -> float | None:
    try:
        return float(cell)
    except ValueError:
        return None


def load_csv(path, target_column: str = DEFAULT_TARGET) -> ProcessDataset:
    """Read a process CSV.

    Every column other than the target whose cells are numeric becomes a
    feature, in file order. Columns with no numeric cell at all (timestamps,
    machine names) are skipped. A numeric column containing a non-numeric,
    empty or non-finite cell is an error; missing values are never imputed.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: empty file, header row required") from None
        rows = [r for r in reader if r]
    if target_column not in header:
        raise DatasetError(f"{path}: target column {target_column!r} not found")
    for lineno, r in enumerate(rows, start=2):
        if len(r) != len(header):
            raise DatasetError(
                f"{path}: line {lineno} has {len(r)} cells, header has {len(header)}"
            )

    t_idx = header.index(target_column)
    target = []
    for lineno, r in enumerate(rows, start=2):
        v = _parse_number(r[t_idx].strip())
        if v not in (0.0, 1.0):
            raise DatasetError(
                f"{path}: line {lineno}, column {target_column!r}: "
                f"target must be 0 or 1, got {r[t_idx]!r}"
            )
        target.append(int(v))

    names, columns = [], []
    for j, name in enumerate(header):
        if j == t_idx:
            continue
        parsed = [_parse_number(r[j].strip()) for r in rows]
        if rows and all(v is None for v in parsed):
            continue
        for lineno, (r, v) in enumerate(zip(rows, parsed), start=2):
            if v is None:
                raise DatasetError(
                    f"{path}: line {lineno}, column {name!r}: "
                    f"non-numeric or missing value {r[j]!r}"
                )
            if not math.isfinite(v):
                raise DatasetError(
                    f"{path}: line {lineno}, column {name!r}: non-finite value {r[j]!r}"
                )
        names.append(name)
        columns.append(parsed)

    X = np.array(columns, dtype=float).T if columns else np.empty((len(rows), 0))
    X = X.reshape(len(rows), len(names))
    return ProcessDataset(X, tuple(names), np.array(target, dtype=np.int64), target_column)


def _format_value(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)


def write_csv(ds: ProcessDataset, path) -> None:
    """Write ``ds`` in the format :func:`load_csv` reads (target column first)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([ds.target_name, *ds.feature_names])
        for y, row in zip(ds.target, ds.features):
            w.writerow([int(y), *(_format_value(v) for v in row)])


def select_features(ds: ProcessDataset, keep: Sequence[str]) -> ProcessDataset:
    unknown = [k for k in keep if k not in ds.feature_names]
    if unknown:
        raise DatasetError(f"unknown feature(s): {', '.join(map(repr, unknown))}")
    if len(set(keep)) != len(keep):
        raise DatasetError("keep list contains duplicates")
    idx = [ds.feature_names.index(k) for k in keep]
    return ProcessDataset(ds.features[:, idx], tuple(keep), ds.target, ds.target_name)


def filter_rows(
    ds: ProcessDataset, predicate: Callable[[dict[str, float]], bool]
) -> ProcessDataset:
    """Keep rows for which ``predicate(row_as_dict)`` is true.

    Generic hook for site-specific exclusions, e.g. dropping products made
    under a different process index.
    """
    keep = [
        bool(predicate(dict(zip(ds.feature_names, map(float, row)))))
        for row in ds.features
    ]
    return ds.take(np.array(keep, dtype=bool).reshape(-1))


def quality_check(ds: ProcessDataset, iqr_k: float = 1.5) -> QualityReport:
    """Count missing values and IQR-fence outliers per feature.

    A value is an outlier when it lies outside ``[Q1 - k*IQR, Q3 + k*IQR]``.
    Quartiles use linear interpolation. The data is not modified.
    """
    if not iqr_k > 0:
        raise DatasetError("iqr_k must be positive")
    X = ds.features
    missing, outliers = [], []
    for j in range(ds.n_features):
        col = X[:, j]
        finite = np.isfinite(col)
        missing.append(int(np.sum(~finite)))
        vals = col[finite]
        if vals.size == 0:
            outliers.append(0)
            continue
        q1, q3 = np.percentile(vals, [25, 75])
        iqr = q3 - q1
        lo, hi = q1 - iqr_k * iqr, q3 + iqr_k * iqr
        outliers.append(int(np.sum((vals < lo) | (vals > hi))))
    return QualityReport(ds.feature_names, tuple(missing), tuple(outliers), ds.n_rows, iqr_k)


def split(ds: ProcessDataset, test_fraction: float = 0.5, seed: int = 0) -> SplitPair:
    """Uniform random train/test partition (not stratified)."""
    if not 0 < test_fraction < 1:
        raise DatasetError("test_fraction must lie strictly between 0 and 1")
    n = ds.n_rows
    if n < 2:
        raise DatasetError("need at least two rows to split")
    n_test = int(round(test_fraction * n))
    n_test = min(max(n_test, 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    test_rows = np.sort(perm[:n_test])
    train_rows = np.sort(perm[n_test:])
    return SplitPair(ds.take(train_rows), ds.take(test_rows), seed, train_rows, test_rows)


def fold_assignment(n: int, k: int, seed: int = 0) -> np.ndarray:
    """Fold id per row; fold sizes differ by at most one."""
    if k < 2:
        raise DatasetError("k must be at least 2")
    if n < k:
        raise DatasetError(f"cannot make {k} folds from {n} rows")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.empty(n, dtype=np.int64)
    folds[perm] = np.arange(n) % k
    return folds


def cv_folds(
    ds: ProcessDataset, k: int = 3, seed: int = 0
) -> list[tuple[ProcessDataset, ProcessDataset]]:
    folds = fold_assignment(ds.n_rows, k, seed)
    return [(ds.take(folds != f), ds.take(folds == f)) for f in range(k)]
