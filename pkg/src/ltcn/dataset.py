"""Loading, scaling, target encoding and fold assignment for tabular data."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .transfer import TransferFunction


class DatasetError(ValueError):
    """Malformed or unusable input table."""


@dataclass(frozen=True)
class RawTable:
    """Numeric features plus one categorical label per row, before scaling."""

    features: np.ndarray
    labels: tuple[str, ...]
    feature_names: tuple[str, ...]
    label_name: str = "class"

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        if features.ndim != 2:
            raise DatasetError("features must be a 2-D array")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", tuple(str(v) for v in self.labels))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        k, m = features.shape
        if len(self.labels) != k:
            raise DatasetError(f"{len(self.labels)} labels for {k} rows")
        if len(self.feature_names) != m:
            raise DatasetError(f"{len(self.feature_names)} feature names for {m} columns")
        if k < 2:
            raise DatasetError("need at least 2 rows")
        if m < 1:
            raise DatasetError("need at least 1 feature")
        if not np.all(np.isfinite(features)):
            raise DatasetError("feature values must be finite")
        if len(set(self.labels)) < 2:
            raise DatasetError("fewer than 2 classes")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def classes(self) -> tuple[str, ...]:
        """Distinct labels in order of first appearance."""
        return tuple(dict.fromkeys(self.labels))

    def subset(self, index) -> RawTable:
        index = np.asarray(index, dtype=int)
        return RawTable(self.features[index], [self.labels[i] for i in index],
                        self.feature_names, self.label_name)


@dataclass(frozen=True)
class MinMaxScaler:
    mins: np.ndarray
    maxs: np.ndarray

    def transform(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.mins.shape[0]:
            raise DatasetError(
                f"expected {self.mins.shape[0]} feature columns, found "
                f"{x.shape[1] if x.ndim == 2 else 'a non-tabular array'}")
        span = self.maxs - self.mins
        constant = span == 0
        scaled = (x - self.mins) / np.where(constant, 1.0, span)
        scaled[:, constant] = 0.5
        return np.clip(scaled, 0.0, 1.0)

    def to_pairs(self) -> list[list[float]]:
        return [[float(a), float(b)] for a, b in zip(self.mins, self.maxs)]

    @classmethod
    def from_pairs(cls, pairs) -> MinMaxScaler:
        arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0].copy(), arr[:, 1].copy())


@dataclass(frozen=True)
class Dataset:
    """Scaled features ``X`` (K x M) and encoded targets ``Y`` (K x N)."""

    X: np.ndarray
    Y: np.ndarray
    labels: tuple[str, ...]
    classes: tuple[str, ...]
    scaler: MinMaxScaler
    feature_names: tuple[str, ...]
    tf: TransferFunction = field(default_factory=TransferFunction)


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: int

    def test_index(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_index(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def splits(self):
        for fold in range(self.k):
            yield self.train_index(fold), self.test_index(fold)


def load_csv(path, delimiter: str = ",", header: bool = True,
             require_label: bool = True) -> RawTable:
    """Read a CSV whose last column holds the class label.

    Raises :class:`DatasetError` naming the offending row and column for
    non-numeric cells, and for ragged rows or a single-class label column.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh, delimiter=delimiter) if r]
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DatasetError(f"{path} is empty")

    first_data_line = 1
    if header:
        names, rows = rows[0], rows[1:]
        first_data_line = 2
    else:
        names = [f"f{j + 1}" for j in range(len(rows[0]) - 1)] + ["class"]
    width = len(names)
    if width < 2:
        raise DatasetError("need at least one feature column and a label column")

    features = np.empty((len(rows), width - 1))
    labels = []
    for i, row in enumerate(rows):
        line = i + first_data_line
        if len(row) != width:
            raise DatasetError(f"row {line}: expected {width} fields, found {len(row)}")
        for j, cell in enumerate(row[:-1]):
            try:
                features[i, j] = float(cell)
            except ValueError:
                raise DatasetError(
                    f"row {line}, column {j + 1} ({names[j]}): non-numeric value {cell!r}") from None
            if not np.isfinite(features[i, j]):
                raise DatasetError(f"row {line}, column {j + 1} ({names[j]}): non-finite value")
        labels.append(row[-1].strip())
    return RawTable(features, labels, [n.strip() for n in names[:-1]], names[-1].strip())


def read_feature_rows(path, n_features: int, delimiter: str = ",",
                      header: bool = True) -> np.ndarray:
    """Read unlabelled (M columns) or labelled (M + 1 columns) rows for prediction."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh, delimiter=delimiter) if r]
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    if header and rows:
        head, rows = rows[0], rows[1:]
        if len(head) not in (n_features, n_features + 1):
            raise DatasetError(
                f"feature-count mismatch: expected {n_features} columns, found {len(head)}")
    out = np.empty((len(rows), n_features))
    for i, row in enumerate(rows):
        if len(row) not in (n_features, n_features + 1):
            raise DatasetError(
                f"feature-count mismatch: expected {n_features} columns, found {len(row)}")
        try:
            out[i] = [float(c) for c in row[:n_features]]
        except ValueError:
            raise DatasetError(f"row {i + 1 + header}: non-numeric feature value") from None
    return out


def fit_scaler(features) -> MinMaxScaler:
    x = np.asarray(features, dtype=float)
    return MinMaxScaler(x.min(axis=0), x.max(axis=0))


def normalize_min_max(table: RawTable) -> tuple[np.ndarray, MinMaxScaler]:
    """Scale every column to [0, 1]; constant columns become 0.5."""
    scaler = fit_scaler(table.features)
    return scaler.transform(table.features), scaler


def encode_targets(labels: Sequence[str], classes: Sequence[str],
                   tf: TransferFunction) -> np.ndarray:
    position = {c: j for j, c in enumerate(classes)}
    Y = np.full((len(labels), len(classes)), tf.clip_low)
    for i, label in enumerate(labels):
        try:
            Y[i, position[label]] = tf.clip_high
        except KeyError:
            raise DatasetError(f"unknown label {label!r}; known classes: {list(classes)}") from None
    return Y


def build_dataset(table: RawTable, tf: TransferFunction,
                  classes: Sequence[str] | None = None,
                  scaler: MinMaxScaler | None = None) -> Dataset:
    """Scale and encode a table, optionally reusing a fitted scaler/class order."""
    classes = tuple(classes) if classes is not None else table.classes
    if scaler is None:
        X, scaler = normalize_min_max(table)
    else:
        X = scaler.transform(table.features)
    Y = encode_targets(table.labels, classes, tf)
    return Dataset(X, Y, table.labels, classes, scaler, table.feature_names, tf)


def make_folds(labels: Sequence[str], k: int, seed: int) -> FoldPlan:
    """Seeded stratified k-fold assignment.

    Instances are shuffled within each class, the per-class lists are laid
    end to end (classes in first-appearance order) and dealt round-robin.
    Each class then occupies a contiguous run of the deal, which keeps both
    the per-class and the overall fold sizes within one of each other.
    """
    n = len(labels)
    if not 2 <= k <= n:
        raise DatasetError(f"fold count k={k} out of range [2, {n}]")
    rng = np.random.default_rng(seed)
    order = []
    for cls in dict.fromkeys(labels):
        members = np.array([i for i, lab in enumerate(labels) if lab == cls])
        order.extend(rng.permutation(members))
    assignments = np.empty(n, dtype=int)
    assignments[np.asarray(order, dtype=int)] = np.arange(n) % k
    return FoldPlan(k, assignments, seed)
