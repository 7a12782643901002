"""Dataset ingestion, standardization and seeded train/validation/test splits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class DataError(ValueError):
    """Raised when input data cannot be parsed or is unusable."""


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    targets: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        targets = np.ascontiguousarray(self.targets, dtype=np.float64)
        if features.ndim != 2 or targets.ndim != 1:
            raise DataError("features must be 2-D and targets 1-D")
        if features.shape[0] != targets.shape[0]:
            raise DataError(
                f"{features.shape[0]} feature rows but {targets.shape[0]} targets"
            )
        if features.shape[1] < 1:
            raise DataError("dataset needs at least one feature column")
        if len(self.feature_names) != features.shape[1]:
            raise DataError("feature_names length does not match column count")
        if not (np.all(np.isfinite(features)) and np.all(np.isfinite(targets))):
            raise DataError("dataset contains non-finite values")
        features.flags.writeable = False
        targets.flags.writeable = False
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n_rows(self) -> int:
        return self.targets.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.intp)
        return Dataset(self.features[indices], self.targets[indices], self.feature_names)


@dataclass(frozen=True)
class ScalerStats:
    feature_means: np.ndarray
    feature_stds: np.ndarray
    target_mean: float
    target_std: float

    def __post_init__(self):
        means = np.asarray(self.feature_means, dtype=np.float64)
        stds = np.asarray(self.feature_stds, dtype=np.float64)
        if means.shape != stds.shape or means.ndim != 1:
            raise DataError("scaler mean/std vectors must be 1-D and equal length")
        if np.any(stds <= 0) or self.target_std <= 0:
            raise DataError("scaler standard deviations must be strictly positive")
        object.__setattr__(self, "feature_means", means)
        object.__setattr__(self, "feature_stds", stds)
        object.__setattr__(self, "target_mean", float(self.target_mean))
        object.__setattr__(self, "target_std", float(self.target_std))

    @classmethod
    def identity(cls, n_features: int) -> "ScalerStats":
        return cls(np.zeros(n_features), np.ones(n_features), 0.0, 1.0)

    def transform_features(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.feature_means.shape[0]:
            raise DataError(
                f"expected {self.feature_means.shape[0]} feature columns, "
                f"found {X.shape[1] if X.ndim == 2 else 'non-matrix input'}"
            )
        return (X - self.feature_means) / self.feature_stds

    def inverse_features(self, Z) -> np.ndarray:
        return np.asarray(Z, dtype=np.float64) * self.feature_stds + self.feature_means

    def transform_targets(self, y) -> np.ndarray:
        return (np.asarray(y, dtype=np.float64) - self.target_mean) / self.target_std

    def inverse_targets(self, z) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self.target_std + self.target_mean

    def to_dict(self) -> dict:
        return {
            "feature_means": [float(v) for v in self.feature_means],
            "feature_stds": [float(v) for v in self.feature_stds],
            "target_mean": self.target_mean,
            "target_std": self.target_std,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerStats":
        return cls(
            np.array(d["feature_means"], dtype=np.float64),
            np.array(d["feature_stds"], dtype=np.float64),
            d["target_mean"],
            d["target_std"],
        )


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.1
    validation_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        for name in ("test_fraction", "validation_fraction"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise DataError(f"{name} must lie in (0, 1), got {value}")


def _parse_float(cell: str, row: int, col: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DataError(f"row {row}, column {col}: cannot parse {cell!r} as a number") from None
    if not math.isfinite(value):
        raise DataError(f"row {row}, column {col}: non-finite value {cell!r}")
    return value


def _looks_numeric(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _read_table(path) -> tuple[list[str], bool, np.ndarray]:
    """Parse a numeric CSV into ``(header, has_header, values)``.

    A header row is detected when any cell of the first row fails to parse
    as a number.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path} is empty")

    first = [c.strip() for c in rows[0]]
    has_header = not all(_looks_numeric(c) for c in first)
    n_cols = len(first)
    header = first if has_header else [f"x{i}" for i in range(n_cols)]
    body = rows[1:] if has_header else rows
    # 1-based file line numbers for error messages
    line0 = 2 if has_header else 1
    values = np.empty((len(body), n_cols), dtype=np.float64)
    for i, row in enumerate(body):
        if len(row) != n_cols:
            raise DataError(f"row {line0 + i}: expected {n_cols} cells, found {len(row)}")
        for j, cell in enumerate(row):
            values[i, j] = _parse_float(cell.strip(), line0 + i, j)
    return header, has_header, values


def load_csv(path, target_column: str | int = -1) -> Dataset:
    """Read a comma-separated file into a :class:`Dataset`.

    ``target_column`` is a header name or a zero-based index (negative
    indices count from the right).
    """
    header, has_header, values = _read_table(path)
    n_cols = len(header)
    if isinstance(target_column, str) and not _is_int_string(target_column):
        if not has_header:
            raise DataError(f"target column {target_column!r} given by name but file has no header")
        if target_column not in header:
            raise DataError(f"target column {target_column!r} not found in header {header}")
        target_idx = header.index(target_column)
    else:
        target_idx = int(target_column)
        if not -n_cols <= target_idx < n_cols:
            raise DataError(f"target column index {target_idx} out of range for {n_cols} columns")
        target_idx %= n_cols
    if n_cols < 2:
        raise DataError("need at least one feature column besides the target")
    if values.shape[0] < 2:
        raise DataError(f"{path} has fewer than 2 data rows")

    feature_cols = [j for j in range(n_cols) if j != target_idx]
    return Dataset(
        values[:, feature_cols],
        values[:, target_idx],
        tuple(header[j] for j in feature_cols),
    )


def load_features(path) -> np.ndarray:
    """Read a target-free CSV; every column is a feature."""
    return _read_table(path)[2]


def _is_int_string(s: str) -> bool:
    try:
        int(s)
    except ValueError:
        return False
    return True


def fit_scaler(ds: Dataset, train_indices) -> ScalerStats:
    """Population mean/std over the given rows; zero stds become 1.0."""
    idx = np.asarray(train_indices, dtype=np.intp)
    if idx.size == 0:
        raise DataError("cannot fit scaler on an empty index list")
    if idx.min() < 0 or idx.max() >= ds.n_rows:
        raise DataError("train indices out of bounds")
    X = ds.features[idx]
    y = ds.targets[idx]
    f_std = X.std(axis=0)
    f_std[f_std == 0] = 1.0
    t_std = float(y.std())
    return ScalerStats(X.mean(axis=0), f_std, float(y.mean()), t_std if t_std > 0 else 1.0)


def apply_scaler(ds: Dataset, stats: ScalerStats) -> Dataset:
    return Dataset(
        stats.transform_features(ds.features),
        stats.transform_targets(ds.targets),
        ds.feature_names,
    )


def invert_scaler(ds: Dataset, stats: ScalerStats) -> Dataset:
    return Dataset(
        stats.inverse_features(ds.features),
        stats.inverse_targets(ds.targets),
        ds.feature_names,
    )


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def seeded_permutation(n: int, seed: int) -> np.ndarray:
    """Fisher-Yates shuffle of ``0..n-1`` driven by raw PCG64 output.

    Only the raw 64-bit stream of PCG64 is used (stable across NumPy
    versions and platforms); the shuffle itself is done here so the result
    does not depend on NumPy's sampling routines.
    """
    perm = np.arange(n, dtype=np.intp)
    if n < 2:
        return perm
    raw = np.random.PCG64(seed).random_raw(n - 1)
    for k, i in enumerate(range(n - 1, 0, -1)):
        j = int(raw[k]) % (i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def split(ds: Dataset | int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return sorted (train, validation, test) row indices.

    ``ds`` may also be a plain row count.
    """
    n = ds if isinstance(ds, (int, np.integer)) else ds.n_rows
    n_test = _round_half_up(n * spec.test_fraction)
    remaining = n - n_test
    n_val = _round_half_up(remaining * spec.validation_fraction)
    n_train = remaining - n_val
    if min(n_test, n_val, n_train) < 1:
        raise DataError(
            f"split of {n} rows gives empty partition "
            f"(train={n_train}, validation={n_val}, test={n_test})"
        )
    perm = seeded_permutation(n, spec.seed)
    test = np.sort(perm[:n_test])
    val = np.sort(perm[n_test:n_test + n_val])
    train = np.sort(perm[n_test + n_val:])
    return train, val, test


def dataset_from_arrays(X: Sequence, y: Sequence, feature_names=None) -> Dataset:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    names = feature_names or tuple(f"x{i}" for i in range(X.shape[1]))
    return Dataset(X, np.asarray(y, dtype=np.float64), tuple(names))
