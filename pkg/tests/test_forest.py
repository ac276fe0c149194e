import itertools

import numpy as np
import pytest

from fraudadv.dataset import Dataset, generate_synthetic
from fraudadv.errors import ConfigError, DataError
from fraudadv.forest import (ForestConfig, RandomForestModel, Tree, best_split, gini, grow_tree,
                             predict, predict_proba, train_forest)


def brute_force_split(X, y):
    """Every (feature, midpoint) pair, scored with exact fractions via gini()."""
    best = None
    for f in range(X.shape[1]):
        vals = sorted(set(X[:, f].tolist()))
        for lo, hi in zip(vals, vals[1:]):
            t = (lo + hi) / 2
            left = y[X[:, f] <= t]
            right = y[X[:, f] > t]
            w = (len(left) * gini((np.sum(left == 0), np.sum(left == 1)))
                 + len(right) * gini((np.sum(right == 0), np.sum(right == 1)))) / len(y)
            if best is None or w < best[2] - 1e-12:
                best = (f, t, w)
    return best


class TestGini:
    @pytest.mark.parametrize("counts,expected", [((10, 0), 0.0), ((0, 7), 0.0), ((5, 5), 0.5),
                                                 ((3, 1), 0.375)])
    def test_values(self, counts, expected):
        assert gini(counts) == pytest.approx(expected, abs=1e-15)

    def test_symmetric_and_max_at_balance(self):
        for a, b in itertools.product(range(12), repeat=2):
            if a + b:
                assert gini((a, b)) == pytest.approx(gini((b, a)))
                assert gini((a, b)) <= 0.5 + 1e-15

    def test_empty(self):
        with pytest.raises(ValueError):
            gini((0, 0))


class TestBestSplit:
    def test_pure(self):
        assert best_split(np.array([[0.0], [1.0]]), np.array([1, 1]), [0]) is None

    def test_constant_feature(self):
        assert best_split(np.array([[2.0], [2.0]]), np.array([0, 1]), [0]) is None

    def test_step(self):
        s = best_split(np.array([[0.0], [1.0], [2.0], [3.0]]), np.array([0, 0, 1, 1]), [0])
        assert s.feature_index == 0 and s.threshold == 1.5 and s.weighted_child_gini == 0.0

    def test_tie_goes_to_lowest_feature(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0]])
        s = best_split(X, np.array([0, 1]), [1, 0])
        assert s.feature_index == 0

    def test_tie_goes_to_lowest_threshold(self):
        # splits at 0.5 and 2.5 both leave one mixed child of the same size
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        s = best_split(X, np.array([1, 0, 1, 0]), [0])
        assert brute_force_split(X, np.array([1, 0, 1, 0]))[1] == s.threshold == 0.5

    def test_min_samples_leaf(self):
        X = np.arange(6.0)[:, None]
        y = np.array([1, 0, 0, 0, 0, 0])
        assert best_split(X, y, [0]).threshold == 0.5
        assert best_split(X, y, [0], min_samples_leaf=2).threshold == 1.5

    def test_matches_brute_force_20_rows(self, rng):
        for _ in range(20):
            X = rng.normal(size=(20, 3)).round(1)
            y = rng.integers(0, 2, 20)
            s = best_split(X, y, range(3))
            ref = brute_force_split(X, y)
            if ref is None:
                assert s is None
                continue
            assert (s.feature_index, s.threshold) == ref[:2]
            assert s.weighted_child_gini == pytest.approx(ref[2], abs=1e-12)

    def test_never_increases_impurity(self, rng):
        for _ in range(50):
            X = rng.normal(size=(30, 4))
            y = rng.integers(0, 2, 30)
            s = best_split(X, y, range(4))
            if s is not None:
                assert s.weighted_child_gini <= gini((np.sum(y == 0), np.sum(y == 1))) + 1e-12


class TestForest:
    def test_full_tree_memorizes(self, rng):
        X = rng.normal(size=(200, 3))
        y = rng.integers(0, 2, 200)
        ds = Dataset(("a", "b", "c"), X, y)
        cfg = ForestConfig(n_trees=1, bootstrap=False, features_per_split=3, max_depth=None)
        m = train_forest(ds, cfg)
        assert np.all(m.predict(X) == y)

    def test_accuracy_on_blobs(self, blobs):
        tr, te = blobs
        m = train_forest(tr, ForestConfig(n_trees=30, seed=1))
        assert np.mean(m.predict(te.X) == te.y) >= 0.95

    def test_deterministic_and_serial_equals_parallel(self):
        ds = generate_synthetic(300, 0.3, 4, 1.5, seed=0)
        cfg = ForestConfig(n_trees=4, seed=9)
        a = train_forest(ds, cfg).to_json()
        assert a == train_forest(ds, cfg).to_json()
        assert a == train_forest(ds, cfg, n_jobs=2).to_json()
        assert a != train_forest(ds, ForestConfig(n_trees=4, seed=10)).to_json()

    def test_max_depth(self):
        ds = generate_synthetic(300, 0.5, 2, 0.5, seed=0)
        m = train_forest(ds, ForestConfig(n_trees=3, max_depth=2))

        def depth(node):
            return 0 if "counts" in node else 1 + max(depth(node["left"]), depth(node["right"]))
        assert all(depth(t.to_node()) <= 2 for t in m.trees)

    def test_min_samples_leaf(self):
        ds = generate_synthetic(300, 0.5, 2, 0.5, seed=0)
        m = train_forest(ds, ForestConfig(n_trees=2, min_samples_leaf=10, bootstrap=False))
        for t in m.trees:
            leaves = t.counts[t.feature < 0]
            assert leaves.sum(axis=1).min() >= 10

    def test_json_round_trip(self, tmp_path):
        ds = generate_synthetic(200, 0.3, 3, 1.0, seed=1)
        m = train_forest(ds, ForestConfig(n_trees=3, seed=2))
        m.save(tmp_path / "rf.json")
        back = RandomForestModel.load(tmp_path / "rf.json")
        assert back.to_json() == m.to_json()
        assert np.array_equal(back.predict(ds.X), m.predict(ds.X))
        assert all(np.array_equal(a.counts, b.counts) for a, b in zip(m.trees, back.trees))

    def test_single_class(self):
        with pytest.raises(DataError):
            train_forest(Dataset(("a",), [[1.0], [2.0]], [1, 1]))

    @pytest.mark.parametrize("kw", [dict(n_trees=0), dict(max_depth=0), dict(min_samples_leaf=0),
                                    dict(features_per_split="log2"), dict(features_per_split=0)])
    def test_bad_config(self, kw):
        with pytest.raises(ConfigError):
            ForestConfig(**kw)

    def test_features_per_split_above_d(self):
        ds = generate_synthetic(100, 0.3, 2, 1.0, seed=1)
        with pytest.raises(ConfigError):
            train_forest(ds, ForestConfig(n_trees=1, features_per_split=3))

    @pytest.mark.parametrize("seed", range(5))
    def test_weights_equal_repeated_rows(self, seed):
        # a row weight of k must grow the same tree as k physical copies
        rng = np.random.default_rng(seed)
        X = rng.integers(0, 6, size=(60, 4)).astype(float)
        y = (X[:, 0] + rng.normal(size=60) > 2.5).astype(np.int64)
        w = rng.integers(0, 4, size=60)
        cfg = ForestConfig(n_trees=1, features_per_split=2, max_depth=None)
        weighted = grow_tree(np.ascontiguousarray(X.T), y, w, cfg, np.random.default_rng(9))
        rows = np.repeat(np.arange(60), w)
        Xr, yr = X[rows], y[rows]
        repeated = grow_tree(np.ascontiguousarray(Xr.T), yr, np.ones(len(rows), dtype=np.int64),
                             cfg, np.random.default_rng(9))
        assert weighted.to_node() == repeated.to_node()


def stump(vote):
    """One-leaf tree voting ``vote``."""
    counts = [[0, 1]] if vote else [[1, 0]]
    return Tree(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]), np.array(counts))


def forest_of(votes, d=1):
    return RandomForestModel([stump(v) for v in votes], tuple(f"f{i}" for i in range(d)),
                             ForestConfig(n_trees=len(votes)))


class TestVoting:
    @pytest.mark.parametrize("votes,label", [((1,), 1), ((0,), 0), ((1, 1, 0), 1), ((0, 0, 1), 0),
                                             ((1, 0), 1), ((0, 1, 0, 1), 1)])
    def test_majority_tie_to_fraud(self, votes, label):
        assert predict(forest_of(votes), [0.0]) == label

    @pytest.mark.parametrize("votes,p", [((1, 1), 1.0), ((0, 0, 0), 0.0),
                                         ((1, 1, 0, 0, 0, 0, 0, 0), 0.25)])
    def test_proba(self, votes, p):
        assert predict_proba(forest_of(votes), [0.0]) == p

    def test_leaf_tie_votes_fraud(self):
        t = Tree(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]), np.array([[3, 3]]))
        assert t.predict(np.zeros((1, 1))).tolist() == [1]

    def test_dimension_mismatch(self):
        with pytest.raises(DataError):
            predict(forest_of((1,), d=2), [0.0])
