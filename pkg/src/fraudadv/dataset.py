"""Tabular fraud data: CSV ingestion, synthetic generation, splitting and SMOTE.

A :class:`Dataset` wraps a read-only ``(n, d)`` float matrix ``X`` and a
``(n,)`` label vector ``y`` (0 = legitimate, 1 = fraud) together with the
column names. Every function here is a pure function of its inputs and seed.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, DataError

LABEL_COLUMN = "Class"
PROVENANCES = ("file-loaded", "synthetic", "smote-augmented", "split-derived")


class Sample(NamedTuple):
    features: np.ndarray
    label: int


@dataclass(frozen=True, eq=False)
class Dataset:
    feature_names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    provenance: str = "file-loaded"

    def __post_init__(self):
        names = tuple(str(n) for n in self.feature_names)
        if len(set(names)) != len(names):
            raise DataError(f"duplicate feature names: {names}")
        X = np.array(self.X, dtype=np.float64, copy=True)
        if X.ndim == 1 and X.size == 0:
            X = X.reshape(0, len(names))
        y = np.array(self.y, dtype=np.int64, copy=True).reshape(-1)
        if X.ndim != 2 or X.shape[1] != len(names):
            raise DataError(
                f"feature matrix shape {X.shape} does not match {len(names)} feature names")
        if X.shape[0] != y.shape[0]:
            raise DataError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
        if not np.all(np.isfinite(X)):
            raise DataError("feature matrix contains NaN or infinite values")
        if not np.all((y == 0) | (y == 1)):
            raise DataError("labels must be 0 or 1")
        if self.provenance not in PROVENANCES:
            raise DataError(f"unknown provenance {self.provenance!r}")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return self.X.shape[0]

    def __getitem__(self, i: int) -> Sample:
        return Sample(self.X[i], int(self.y[i]))

    def __iter__(self) -> Iterator[Sample]:
        for i in range(len(self)):
            yield self[i]

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def class_counts(self) -> tuple[int, int]:
        n1 = int(self.y.sum())
        return len(self) - n1, n1

    def subset(self, indices, provenance: str = "split-derived") -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.feature_names, self.X[idx], self.y[idx], provenance)

    def with_features(self, X: np.ndarray, provenance: str | None = None) -> "Dataset":
        return Dataset(self.feature_names, X, self.y, provenance or self.provenance)

    def require_both_classes(self) -> None:
        n0, n1 = self.class_counts()
        if n0 == 0 or n1 == 0:
            raise DataError(
                f"training data must contain both classes (class 0: {n0}, class 1: {n1})")

    def to_csv(self, path, label_column: str = LABEL_COLUMN) -> None:
        """Write the dataset back out in the same schema ``load_csv`` reads."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([*self.feature_names, label_column])
            for row, label in zip(self.X, self.y):
                w.writerow([repr(float(v)) for v in row] + [int(label)])


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")


@dataclass(frozen=True)
class SmoteConfig:
    k_neighbors: int = 5
    target_ratio: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ConfigError(f"k_neighbors must be >= 1, got {self.k_neighbors}")
        if not 0.0 < self.target_ratio <= 1.0:
            raise ConfigError(f"target_ratio must be in (0, 1], got {self.target_ratio}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def load_csv(path, label_column: str = LABEL_COLUMN) -> Dataset:
    """Read a header-first CSV whose ``label_column`` holds 0/1 labels.

    All other columns become features, in file order. Errors name the
    offending (1-based) line and column.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"data file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, expected a header row") from None
        if label_column not in header:
            raise DataError(f"{path}: no {label_column!r} column in header {header}")
        label_idx = header.index(label_column)
        names = [h for i, h in enumerate(header) if i != label_idx]
        feat_idx = [i for i in range(len(header)) if i != label_idx]
        rows: list[list[float]] = []
        labels: list[int] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: line {lineno} has {len(row)} columns, header has {len(header)}")
            values = []
            for i in feat_idx:
                try:
                    v = float(row[i])
                except ValueError:
                    raise DataError(
                        f"{path}: line {lineno}, column {header[i]!r}: "
                        f"non-numeric value {row[i]!r}") from None
                if not math.isfinite(v):
                    raise DataError(
                        f"{path}: line {lineno}, column {header[i]!r}: non-finite value {row[i]!r}")
                values.append(v)
            try:
                label = float(row[label_idx])
            except ValueError:
                label = math.nan
            if label not in (0.0, 1.0):
                raise DataError(
                    f"{path}: line {lineno}, column {label_column!r}: "
                    f"label {row[label_idx]!r} is not 0 or 1")
            rows.append(values)
            labels.append(int(label))
    X = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
    return Dataset(tuple(names), X, np.array(labels, dtype=np.int64), "file-loaded")


def generate_synthetic(n_total: int, fraud_fraction: float, d: int,
                       class_separation: float, seed: int) -> Dataset:
    """Two unit-variance isotropic Gaussians whose means are ``class_separation`` apart.

    Class 0 is centred at the origin, class 1 on the main diagonal. Exactly
    ``round(n_total * fraud_fraction)`` rows are fraud; rows are shuffled.
    """
    if n_total < 2:
        raise ConfigError(f"n_total must be >= 2, got {n_total}")
    if d < 1:
        raise ConfigError(f"d must be >= 1, got {d}")
    if not 0.0 < fraud_fraction < 1.0:
        raise ConfigError(f"fraud_fraction must be in (0, 1), got {fraud_fraction}")
    if class_separation < 0:
        raise ConfigError("class_separation must be non-negative")
    n1 = _round_half_up(n_total * fraud_fraction)
    n0 = n_total - n1
    if n1 == 0 or n0 == 0:
        raise DataError(
            f"fraud_fraction={fraud_fraction} with n_total={n_total} leaves a class empty")
    rng = np.random.default_rng(seed)
    mean1 = np.full(d, class_separation / math.sqrt(d))
    X = np.vstack([rng.standard_normal((n0, d)), rng.standard_normal((n1, d)) + mean1])
    y = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    order = rng.permutation(n_total)
    names = tuple(f"x{i + 1}" for i in range(d))
    return Dataset(names, X[order], y[order], "synthetic")


def split_indices(y: np.ndarray, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Return sorted (train, test) row indices for ``stratified_split``."""
    y = np.asarray(y)
    rng = np.random.default_rng(spec.seed)
    if not spec.stratified:
        perm = rng.permutation(len(y))
        n_train = _round_half_up(len(y) * spec.train_fraction)
        if n_train in (0, len(y)):
            raise DataError(f"train_fraction {spec.train_fraction} leaves a partition empty")
        return np.sort(perm[:n_train]), np.sort(perm[n_train:])
    train, test = [], []
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        n_train = _round_half_up(len(idx) * spec.train_fraction)
        if len(idx) == 0 or n_train == 0 or n_train == len(idx):
            raise DataError(
                f"class {cls} has {len(idx)} samples; a {spec.train_fraction:g} split "
                "would leave one partition without it")
        idx = idx[rng.permutation(len(idx))]
        train.append(idx[:n_train])
        test.append(idx[n_train:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def stratified_split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Partition ``ds`` so each class is split at ``spec.train_fraction``.

    Within a class the assignment is a seeded shuffle; both outputs keep the
    original row order.
    """
    train_idx, test_idx = split_indices(ds.y, spec)
    return ds.subset(train_idx), ds.subset(test_idx)


def nearest_neighbors(points: np.ndarray, k: int, chunk: int = 1024) -> np.ndarray:
    """Indices of the ``k`` nearest other points (Euclidean), ties to the lowest index."""
    sq = np.sum(points ** 2, axis=1)
    out = np.empty((len(points), k), dtype=np.int64)
    for start in range(0, len(points), chunk):
        block = points[start:start + chunk]
        d2 = sq[start:start + chunk, None] + sq[None, :] - 2.0 * block @ points.T
        np.maximum(d2, 0.0, out=d2)
        rows = np.arange(len(block))
        d2[rows, start + rows] = np.inf
        out[start:start + chunk] = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return out


def smote_oversample(train: Dataset, cfg: SmoteConfig = SmoteConfig()) -> Dataset:
    """Append SMOTE interpolants of the minority class until the class ratio reaches target.

    Each synthetic row is ``x + u * (x_nn - x)`` for a random minority row
    ``x``, one of its ``k`` nearest minority neighbours ``x_nn`` and
    ``u ~ U[0, 1)``. Original rows are returned unchanged and first.
    """
    n0, n1 = train.class_counts()
    minority = 1 if n1 <= n0 else 0
    n_min, n_maj = min(n0, n1), max(n0, n1)
    if n_min < 2:
        raise DataError(f"SMOTE needs at least 2 minority samples, got {n_min}")
    if cfg.k_neighbors >= n_min:
        raise DataError(
            f"k_neighbors={cfg.k_neighbors} must be smaller than the minority count {n_min}")
    n_new = max(0, math.ceil(cfg.target_ratio * n_maj - 1e-9) - n_min)
    if n_new == 0:
        return Dataset(train.feature_names, train.X, train.y, "smote-augmented")
    pts = train.X[train.y == minority]
    nn = nearest_neighbors(pts, cfg.k_neighbors)
    rng = np.random.default_rng(cfg.seed)
    base = rng.integers(0, n_min, size=n_new)
    pick = rng.integers(0, cfg.k_neighbors, size=n_new)
    u = rng.random(n_new)[:, None]
    x = pts[base]
    synth = x + u * (pts[nn[base, pick]] - x)
    X = np.vstack([train.X, synth])
    y = np.concatenate([train.y, np.full(n_new, minority, dtype=np.int64)])
    return Dataset(train.feature_names, X, y, "smote-augmented")


def as_matrix(x: Sequence[float] | np.ndarray, d: int) -> np.ndarray:
    """Coerce a single vector or a batch to a 2-D float array with ``d`` columns."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != d:
        raise DataError(f"expected {d} features, got input of shape {np.shape(x)}")
    return arr
