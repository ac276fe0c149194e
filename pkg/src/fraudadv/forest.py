"""Random forest of CART trees grown on Gini impurity.

Each tree is stored as flat parallel arrays (``feature``, ``threshold``,
``left``, ``right``, ``counts``) so prediction over a batch is a handful of
vectorized gathers per level. Leaves have ``feature == -1``.
Rows with ``x[feature] <= threshold`` go left.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .dataset import Dataset, as_matrix
from .errors import ConfigError, DataError

# Scores within this distance are treated as equal when picking a split,
# so that ties resolve by (feature, threshold) rather than by float noise.
_TIE_TOL = 1e-12


def gini(counts) -> float:
    """Gini impurity ``1 - sum(p_i^2)`` of a pair of class counts."""
    c0, c1 = counts
    if c0 < 0 or c1 < 0:
        raise ValueError("class counts must be non-negative")
    total = c0 + c1
    if total == 0:
        raise ValueError("gini is undefined for an empty node")
    p0, p1 = c0 / total, c1 / total
    return 1.0 - (p0 * p0 + p1 * p1)


class Split(NamedTuple):
    feature_index: int
    threshold: float
    weighted_child_gini: float


def _midpoint(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    mid = (lo + hi) / 2.0
    # adjacent floats: keep the threshold strictly below the upper value
    return np.where(mid < hi, mid, lo)


def best_split(X: np.ndarray, y: np.ndarray, candidate_features,
               min_samples_leaf: int = 1) -> Split | None:
    """Exhaustive CART search over midpoints of consecutive distinct values.

    Returns the split with the lowest sample-weighted mean child Gini, ties
    going to the lowest feature index and then the lowest threshold; ``None``
    when the node is pure or no split leaves ``min_samples_leaf`` rows on
    both sides.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    n = len(y)
    if n == 0:
        raise DataError("best_split needs at least one row")
    n1 = int(np.count_nonzero(y))
    if n1 == 0 or n1 == n:
        return None
    feats = np.unique(np.asarray(candidate_features, dtype=np.int64))
    if len(feats) == 0:
        return None
    rows = np.ascontiguousarray(X[:, feats].T)
    # order within runs of equal values does not affect the counts at run ends
    order = np.argsort(rows, axis=1)
    v = np.take_along_axis(rows, order, axis=1)
    l1 = np.cumsum((y != 0)[order][:, :-1], axis=1, dtype=np.float64)
    nl = np.arange(1, n, dtype=np.float64)
    best = _best_position(v, nl, l1, n, n1, min_samples_leaf)
    if best is None:
        return None
    j, pos, score = best
    return Split(int(feats[j]), float(_midpoint(v[j, pos], v[j, pos + 1])), score)


def _best_position(v: np.ndarray, nl: np.ndarray, l1: np.ndarray, n: float, n1: float,
                   min_samples_leaf: int):
    """Pick the best cut in a block of per-feature sorted values.

    ``v`` is ``(k, m)`` with every row ascending; ``nl`` and ``l1`` give the
    (weighted) row count and fraud count left of each of the ``m - 1`` gaps.
    Returns ``(row, gap, weighted child gini)`` or ``None``.
    """
    nr = n - nl
    valid = v[:, 1:] > v[:, :-1]
    if min_samples_leaf > 1:
        valid &= (nl >= min_samples_leaf) & (nr >= min_samples_leaf)
    if not valid.any():
        return None
    r1 = n1 - l1
    # n * weighted child gini / 2  ==  l0*l1/nl + r0*r1/nr
    score = (nl - l1) * l1 / nl + (nr - r1) * r1 / nr
    score[~valid] = np.inf
    row_min = score.min(axis=1)
    # lowest feature, then lowest threshold, among scores tied with the minimum
    j = int(np.flatnonzero(row_min <= row_min.min() + _TIE_TOL)[0])
    pos = int(np.flatnonzero(score[j] <= row_min[j] + _TIE_TOL)[0])
    return j, pos, 2.0 * float(score[j, pos]) / n


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = 16
    min_samples_leaf: int = 1
    features_per_split: int | str = "sqrt"
    seed: int = 0
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigError(f"max_depth must be >= 1 or None, got {self.max_depth}")
        if self.min_samples_leaf < 1:
            raise ConfigError("min_samples_leaf must be >= 1")
        if isinstance(self.features_per_split, str):
            if self.features_per_split != "sqrt":
                raise ConfigError(
                    f"features_per_split must be a positive int or 'sqrt', "
                    f"got {self.features_per_split!r}")
        elif self.features_per_split < 1:
            raise ConfigError("features_per_split must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    def n_split_features(self, d: int) -> int:
        if self.features_per_split == "sqrt":
            return max(1, math.ceil(math.sqrt(d)))
        if self.features_per_split > d:
            raise ConfigError(f"features_per_split={self.features_per_split} exceeds d={d}")
        return int(self.features_per_split)


@dataclass(eq=False)
class Tree:
    feature: np.ndarray    # int, -1 for leaves
    threshold: np.ndarray  # float
    left: np.ndarray       # int child index, -1 for leaves
    right: np.ndarray
    counts: np.ndarray     # (n_nodes, 2) class counts of training rows reaching the node

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature[node] >= 0
        while active.any():
            idx = rows[active]
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active[idx] = self.feature[node[idx]] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        c = self.counts[self.apply(X)]
        # leaf ties vote fraud
        return (c[:, 1] >= c[:, 0]).astype(np.int64)

    def to_node(self, i: int = 0) -> dict:
        """Recursive node record rooted at node ``i``."""
        if self.feature[i] < 0:
            return {"counts": [int(self.counts[i, 0]), int(self.counts[i, 1])]}
        return {
            "feature": int(self.feature[i]),
            "threshold": float(self.threshold[i]),
            "left": self.to_node(int(self.left[i])),
            "right": self.to_node(int(self.right[i])),
        }

    @classmethod
    def from_node(cls, root: dict) -> "Tree":
        feature, threshold, left, right, counts = [], [], [], [], []

        def add(node):
            i = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            counts.append([0, 0])
            if "counts" in node:
                counts[i] = list(node["counts"])
                return i, counts[i]
            feature[i] = int(node["feature"])
            threshold[i] = float(node["threshold"])
            li, lc = add(node["left"])
            ri, rc = add(node["right"])
            left[i], right[i] = li, ri
            counts[i] = [lc[0] + rc[0], lc[1] + rc[1]]
            return i, counts[i]

        add(root)
        return cls(np.array(feature, dtype=np.int64), np.array(threshold, dtype=np.float64),
                   np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                   np.array(counts, dtype=np.int64).reshape(-1, 2))


def tree_seed(seed: int, t: int) -> np.random.SeedSequence:
    """Independent, order-free seed for tree ``t`` of a forest seeded with ``seed``."""
    return np.random.SeedSequence([seed, t])


def presort(XT: np.ndarray) -> np.ndarray:
    """Row indices sorted by each feature of the feature-major matrix ``XT``."""
    return np.argsort(XT, axis=1, kind="stable")


def grow_tree(XT: np.ndarray, y: np.ndarray, weights: np.ndarray, cfg: ForestConfig,
              rng: np.random.Generator, order: np.ndarray | None = None) -> Tree:
    """Grow one CART tree on the feature-major matrix ``XT``.

    ``weights[i]`` is how many times row ``i`` appears in the training sample
    (a bootstrap draw gives repeats and zeros), so counts match a tree grown
    on the repeated rows. ``order`` is :func:`presort` of ``XT``; each node
    keeps its rows sorted by every feature, so no sorting happens per node.
    """
    d, n_all = XT.shape
    k = cfg.n_split_features(d)
    w = np.asarray(weights, dtype=np.int64)
    wy = w * (np.asarray(y) != 0)
    if order is None:
        order = presort(XT)
    used = w > 0
    m = int(np.count_nonzero(used))
    root = order[used[order]].reshape(d, m)
    mark = np.zeros(n_all, dtype=bool)
    feature, threshold, left, right, counts = [], [], [], [], []
    # explicit stack instead of recursion: deep trees on big data
    stack = [(root, 0, -1, False)]
    while stack:
        S, depth, parent, is_right = stack.pop()
        node = len(feature)
        if parent >= 0:
            (right if is_right else left)[parent] = node
        n = int(w[S[0]].sum())
        n1 = int(wy[S[0]].sum())
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append((n - n1, n1))
        if (cfg.max_depth is not None and depth >= cfg.max_depth) or \
                n < 2 * cfg.min_samples_leaf:
            continue
        if n1 == 0 or n1 == n:
            continue
        cand = np.sort(rng.choice(d, size=k, replace=False))
        rows = S[cand]
        v = XT[cand[:, None], rows]
        nl = np.cumsum(w[rows[:, :-1]], axis=1, dtype=np.float64)
        l1 = np.cumsum(wy[rows[:, :-1]], axis=1, dtype=np.float64)
        best = _best_position(v, nl, l1, n, n1, cfg.min_samples_leaf)
        if best is None:
            continue
        j, pos, _ = best
        feature[node] = int(cand[j])
        threshold[node] = float(_midpoint(v[j, pos], v[j, pos + 1]))
        # stable partition of every feature's sorted list
        goes_left = rows[j, :pos + 1]
        mark[goes_left] = True
        is_left = mark[S]
        mark[goes_left] = False
        n_left = pos + 1
        L = S[is_left].reshape(d, n_left)
        R = S[~is_left].reshape(d, S.shape[1] - n_left)
        # push right first so the left subtree is numbered first
        stack.append((R, depth + 1, node, True))
        stack.append((L, depth + 1, node, False))
    return Tree(np.array(feature, dtype=np.int64), np.array(threshold, dtype=np.float64),
                np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                np.array(counts, dtype=np.int64).reshape(-1, 2))


# Training data shared with worker processes once, not once per tree.
_SHARED: tuple | None = None


def _init_worker(XT, y, order) -> None:
    global _SHARED
    _SHARED = (XT, y, order)


def _fit_one(cfg: ForestConfig, t: int, data: tuple | None = None) -> Tree:
    XT, y, order = data if data is not None else _SHARED
    rng = np.random.default_rng(tree_seed(cfg.seed, t))
    n = len(y)
    if cfg.bootstrap:
        w = np.bincount(rng.integers(0, n, size=n), minlength=n)
    else:
        w = np.ones(n, dtype=np.int64)
    return grow_tree(XT, y, w, cfg, rng, order)


@dataclass(eq=False)
class RandomForestModel:
    trees: list[Tree]
    feature_names: tuple[str, ...]
    config: ForestConfig

    def __post_init__(self):
        self.feature_names = tuple(self.feature_names)
        if len(self.trees) != self.config.n_trees:
            raise DataError(f"{len(self.trees)} trees but config says {self.config.n_trees}")

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def votes(self, X) -> np.ndarray:
        """(n_trees, n_rows) matrix of per-tree class votes."""
        X = as_matrix(X, self.n_features)
        return np.stack([t.predict(X) for t in self.trees])

    def predict_proba(self, X):
        """Fraction of trees voting fraud."""
        p = self.votes(X).mean(axis=0)
        return float(p[0]) if np.ndim(X) == 1 else p

    def predict(self, X) -> np.ndarray:
        v = self.votes(X)
        # ensemble ties vote fraud
        return (2 * v.sum(axis=0) >= len(self.trees)).astype(np.int64)

    def classify(self, X):
        out = self.predict(X)
        return int(out[0]) if np.ndim(X) == 1 else out

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "feature_names": list(self.feature_names),
            "trees": [t.to_node() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RandomForestModel":
        return cls([Tree.from_node(t) for t in d["trees"]], tuple(d["feature_names"]),
                   ForestConfig(**d["config"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "RandomForestModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def train_forest(ds: Dataset, cfg: ForestConfig = ForestConfig(), n_jobs: int = 1) -> RandomForestModel:
    """Bagged CART ensemble.

    Tree ``t`` draws its bootstrap sample and per-node feature subsets from
    ``tree_seed(cfg.seed, t)`` alone, so ``n_jobs > 1`` gives the same forest
    as serial training.
    """
    ds.require_both_classes()
    cfg.n_split_features(ds.n_features)
    XT = np.ascontiguousarray(ds.X.T)
    data = (XT, ds.y, presort(XT))
    ts = range(cfg.n_trees)
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs, initializer=_init_worker,
                                 initargs=data) as ex:
            trees = list(ex.map(_fit_one, [cfg] * cfg.n_trees, ts))
    else:
        trees = [_fit_one(cfg, t, data) for t in ts]
    return RandomForestModel(trees, ds.feature_names, cfg)


def predict(m: RandomForestModel, x):
    return m.classify(x)


def predict_proba(m: RandomForestModel, x):
    return m.predict_proba(x)
