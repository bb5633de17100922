"""Dataset container, CSV ingestion, Z-score normalization and stratified splits."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Raised for malformed input files or datasets that violate a precondition."""


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    feature_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y).astype(np.int64)
        if x.ndim != 2:
            raise DataError(f"feature matrix must be 2-D, got shape {x.shape}")
        if y.ndim != 1 or y.shape[0] != x.shape[0]:
            raise DataError(
                f"label vector length {y.shape} does not match {x.shape[0]} samples"
            )
        if not np.all(np.isfinite(x)):
            raise DataError("feature matrix contains NaN or Inf")
        if np.any((y != 0) & (y != 1)):
            raise DataError("labels must be 0 or 1")
        names = list(self.feature_names) or [f"f{j}" for j in range(x.shape[1])]
        if len(names) != x.shape[1]:
            raise DataError(f"{len(names)} feature names for {x.shape[1]} columns")
        if len(set(names)) != len(names):
            raise DataError("feature names must be unique")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.x[rows], self.y[rows], self.feature_names)

    def with_x(self, x: np.ndarray, feature_names=None) -> "Dataset":
        names = self.feature_names if feature_names is None else feature_names
        return Dataset(x, self.y, names)


@dataclass(frozen=True)
class SplitPair:
    train: Dataset
    test: Dataset
    train_idx: np.ndarray
    test_idx: np.ndarray


def load_features(features_path) -> tuple[np.ndarray, list[str]]:
    """Read a features CSV whose first row holds the feature names."""
    features_path = Path(features_path)
    with open(features_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{features_path}: empty file") from None
        rows = []
        for i, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{features_path}: row {i} has {len(row)} cells, header has {len(header)}"
                )
            values = []
            for j, cell in enumerate(row):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{features_path}: non-numeric cell {cell!r} at row {i}, "
                        f"column {j} ({header[j]})"
                    ) from None
            rows.append(values)
    x = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
    return x, [h.strip() for h in header]


def load_csv(features_path, labels_path) -> Dataset:
    """Read a features CSV (header row of names) and a headerless labels CSV."""
    x, names = load_features(features_path)
    labels_path = Path(labels_path)
    labels = []
    with open(labels_path, newline="", encoding="utf-8") as fh:
        for i, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            cell = row[0].strip()
            try:
                value = float(cell)
            except ValueError:
                raise DataError(f"{labels_path}: non-numeric label {cell!r} at row {i}") from None
            if value not in (0.0, 1.0):
                raise DataError(f"{labels_path}: label {cell!r} at row {i} is not 0 or 1")
            labels.append(int(value))

    if len(labels) != len(x):
        raise DataError(
            f"dimension mismatch: {len(x)} feature rows but {len(labels)} labels"
        )
    return Dataset(x, np.array(labels, dtype=np.int64), names)


def write_csv(d: Dataset, features_path, labels_path) -> None:
    with open(features_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(d.feature_names)
        for row in d.x:
            w.writerow([repr(float(v)) for v in row])
    with open(labels_path, "w", newline="", encoding="utf-8") as fh:
        for v in d.y:
            fh.write(f"{int(v)}\n")


def zscore_stats(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means and n-1 standard deviations."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] < 2:
        raise DataError("Z-score needs at least 2 samples")
    sd = x.std(axis=0, ddof=1)
    # exactly constant columns get sd 0 even if the mean carries rounding noise
    sd[np.ptp(x, axis=0) == 0] = 0.0
    return x.mean(axis=0), sd


def apply_zscore(x: np.ndarray, mean: np.ndarray, sd: np.ndarray) -> np.ndarray:
    # constant columns (sd == 0) map to zeros
    safe = np.where(sd > 0, sd, 1.0)
    out = (np.asarray(x, dtype=np.float64) - mean) / safe
    out[:, sd <= 0] = 0.0
    return out


def zscore(d: Dataset) -> Dataset:
    mean, sd = zscore_stats(d.x)
    return d.with_x(apply_zscore(d.x, mean, sd))


def zscore_split(split: SplitPair, fit_on_train: bool = True) -> SplitPair:
    """Normalize both halves of a split.

    With ``fit_on_train`` the training statistics are applied to the test
    half; otherwise each half is standardized with its own statistics.
    """
    if fit_on_train:
        mean, sd = zscore_stats(split.train.x)
        train = split.train.with_x(apply_zscore(split.train.x, mean, sd))
        test = split.test.with_x(apply_zscore(split.test.x, mean, sd))
    else:
        train, test = zscore(split.train), zscore(split.test)
    return SplitPair(train, test, split.train_idx, split.test_idx)


def stratified_split(d: Dataset, test_fraction: float, seed: int) -> SplitPair:
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    test_parts = []
    for cls in np.unique(d.y):
        idx = np.flatnonzero(d.y == cls)
        if idx.size < 2:
            raise DataError(f"class {cls} has {idx.size} sample(s); need at least 2")
        k = int(round(idx.size * test_fraction))
        k = min(max(k, 1), idx.size - 1)
        test_parts.append(rng.permutation(idx)[:k])
    test_idx = np.sort(np.concatenate(test_parts))
    mask = np.zeros(d.n, dtype=bool)
    mask[test_idx] = True
    train_idx = np.flatnonzero(~mask)
    return SplitPair(d.subset(train_idx), d.subset(test_idx), train_idx, test_idx)


def stratified_folds(y: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Assign each sample to one of ``k`` folds, balancing classes across folds."""
    rng = np.random.default_rng(seed)
    folds = np.empty(len(y), dtype=np.int64)
    for cls in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == cls))
        folds[idx] = np.arange(idx.size) % k
    return folds
