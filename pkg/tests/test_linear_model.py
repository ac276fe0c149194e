import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fraudadv.dataset import Dataset, generate_synthetic
from fraudadv.errors import ConfigError, DataError, NumericError
from fraudadv.linear_model import (LinearModel, TrainConfig, bce_loss, classify, input_gradient,
                                   predict_proba, sigmoid, train)


def model(w, b=0.0, threshold=0.5):
    return LinearModel(np.asarray(w, dtype=float), b, tuple(f"f{i}" for i in range(len(w))),
                       threshold)


def finite_difference(m, x, y, h=1e-5):
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (bce_loss(m, x + e, y) - bce_loss(m, x - e, y)) / (2 * h)
    return g


class TestSigmoid:
    def test_values(self):
        assert sigmoid(0.0) == 0.5
        assert 1 - 1e-15 < sigmoid(50.0) <= 1.0
        assert sigmoid(-50.0) > 0.0

    def test_no_overflow(self):
        with np.errstate(over="raise"):
            z = np.array([-800.0, -700.0, 700.0, 800.0])
            s = sigmoid(z)
        assert np.all(np.isfinite(s)) and s[0] >= 0 and s[-1] == 1.0

    @given(st.floats(-30, 30))
    def test_symmetry(self, z):
        assert abs(sigmoid(z) + sigmoid(-z) - 1.0) <= 1e-15

    def test_vectorized(self):
        z = np.linspace(-5, 5, 11)
        assert np.allclose(sigmoid(z), 1 / (1 + np.exp(-z)), rtol=1e-15, atol=0)


class TestPrediction:
    def test_zero_model(self):
        assert predict_proba(model([0, 0]), [3.0, -2.0]) == 0.5

    def test_orthogonal_feature(self):
        assert predict_proba(model([1, 0]), [0, 99]) == 0.5

    def test_closed_form(self):
        assert predict_proba(model([2], -1), [1]) == pytest.approx(0.7310585786300049, abs=1e-15)

    def test_threshold_inclusive(self):
        assert classify(model([0, 0]), [1, 1]) == 1

    @pytest.mark.parametrize("b,label", [(-10, 0), (10, 1)])
    def test_saturated(self, b, label, rng):
        X = rng.normal(size=(20, 2)) * 100
        assert np.all(model([0, 0], b).classify(X) == label)

    def test_custom_threshold(self):
        m = model([1.0], 0.0, threshold=0.8)
        assert m.classify([1.0]) == 0 and m.classify([2.0]) == 1

    def test_batch_matches_single(self, rng):
        m = model(rng.normal(size=3), 0.3)
        X = rng.normal(size=(10, 3))
        assert np.allclose(m.predict_proba(X), [m.predict_proba(x) for x in X])
        assert m.predict(X).tolist() == [m.classify(x) for x in X]

    def test_dimension_mismatch(self):
        with pytest.raises(DataError):
            predict_proba(model([1, 2]), [1, 2, 3])

    def test_bad_parameters(self):
        with pytest.raises(NumericError):
            model([np.nan])
        with pytest.raises(ConfigError):
            model([1.0], threshold=1.0)


class TestLoss:
    def test_uniform_prediction(self):
        m = model([0.0])
        assert bce_loss(m, [1.0], 1) == pytest.approx(math.log(2))
        assert bce_loss(m, [1.0], 0) == pytest.approx(math.log(2))

    def test_perfect_limit(self):
        assert bce_loss(model([1.0]), [40.0], 1) < 1e-12

    def test_direct_evaluation(self):
        # p = 0.1 exactly when the score is logit(0.1)
        m = model([0.0], math.log(0.1 / 0.9))
        assert bce_loss(m, [0.0], 1) == pytest.approx(2.3025850929940455, rel=1e-12)

    def test_clamped(self):
        assert bce_loss(model([1.0]), [1000.0], 0) == pytest.approx(-math.log(1e-12), rel=1e-5)


class TestInputGradient:
    def test_zero_weights(self):
        assert np.all(input_gradient(model([0, 0, 0]), [1, 2, 3], 1) == 0)

    def test_anti_parallel_for_fraud(self):
        m = model([1.0, -2.0, 0.5], 0.1)
        g = input_gradient(m, [0.2, 0.1, -0.3], 1)
        p = predict_proba(m, [0.2, 0.1, -0.3])
        assert np.allclose(g, (p - 1) * m.weights)
        assert np.all(np.sign(g) == -np.sign(m.weights))

    def test_finite_differences(self, rng):
        for _ in range(20):
            d = int(rng.integers(1, 6))
            m = model(rng.normal(size=d), rng.normal())
            x = rng.normal(size=d)
            y = int(rng.integers(0, 2))
            fd = finite_difference(m, x, y)
            g = input_gradient(m, x, y)
            assert np.linalg.norm(g - fd) <= 1e-5 * np.linalg.norm(g)


class TestTrain:
    def test_separable_pair(self):
        ds = Dataset(("x",), [[-1.0], [1.0]], [0, 1])
        m = train(ds, TrainConfig(learning_rate=0.5, epochs=500))
        assert classify(m, [-1.0]) == 0 and classify(m, [1.0]) == 1

    def test_strong_regularization(self):
        ds = generate_synthetic(200, 0.5, 3, 3.0, seed=0)
        m = train(ds, TrainConfig(learning_rate=1e-7, l2_lambda=1e6, epochs=200))
        assert np.linalg.norm(m.weights) <= 1e-3

    def test_accuracy_on_blobs(self, blobs):
        tr, te = blobs
        m = train(tr)
        acc = np.mean(m.predict(te.X) == te.y)
        # Bayes optimum for unit Gaussians 4 apart is Phi(2) ~= 0.977
        assert acc >= 0.95

    def test_bayes_oracle(self):
        # brute-force Monte Carlo of the Bayes rule (project onto the mean gap, cut at half)
        ds = generate_synthetic(200000, 0.5, 2, 4.0, seed=1)
        proj = ds.X.sum(axis=1) / np.sqrt(2)
        bayes = np.mean((proj >= 2.0) == (ds.y == 1))
        assert bayes == pytest.approx(0.97725, abs=0.003)

    def test_monotone_loss_small_lr(self):
        ds = generate_synthetic(500, 0.3, 3, 2.0, seed=2)
        m = train(ds, TrainConfig(learning_rate=0.01, epochs=300, tolerance=0.0))
        assert np.all(np.diff(m.trace.losses) <= 0)
        assert m.trace.losses[0] == pytest.approx(math.log(2))

    def test_loss_never_above_initial(self):
        ds = generate_synthetic(300, 0.3, 2, 1.0, seed=2)
        big = ds.with_features(ds.X * 1000)
        m = train(big, TrainConfig(learning_rate=10.0, epochs=50))
        assert m.trace.losses[-1] <= math.log(2) + 1e-12

    def test_preconditioned_matches_plain_objective(self):
        ds = generate_synthetic(400, 0.3, 3, 2.0, seed=4)
        raw = ds.with_features(ds.X * [1.0, 100.0, 0.01] + [0.0, 5000.0, 0.0])
        m = train(raw, TrainConfig(learning_rate=0.5, epochs=3000, precondition=True,
                                   tolerance=1e-12, l2_lambda=0.0))
        acc = np.mean(m.predict(raw.X) == raw.y)
        ref = train(ds, TrainConfig(learning_rate=0.5, epochs=3000, tolerance=1e-12, l2_lambda=0.0))
        assert acc == pytest.approx(np.mean(ref.predict(ds.X) == ds.y), abs=0.01)

    def test_deterministic(self):
        ds = generate_synthetic(300, 0.2, 4, 2.0, seed=5)
        a, b = train(ds), train(ds)
        assert a.weights.tobytes() == b.weights.tobytes() and a.bias == b.bias

    def test_single_class(self):
        with pytest.raises(DataError):
            train(Dataset(("x",), [[1.0], [2.0]], [0, 0]))

    def test_non_finite_loss(self):
        ds = Dataset(("x",), [[-1e300], [1e300]], [0, 1])
        with pytest.raises(NumericError, match="learning_rate"):
            train(ds, TrainConfig(learning_rate=1e10))

    @pytest.mark.parametrize("kw", [dict(learning_rate=0), dict(epochs=0), dict(l2_lambda=-1)])
    def test_bad_config(self, kw):
        with pytest.raises(ConfigError):
            TrainConfig(**kw)


def test_json_round_trip(tmp_path, rng):
    m = model(rng.normal(size=4), -0.123456789012345)
    m.save(tmp_path / "m.json")
    back = LinearModel.load(tmp_path / "m.json")
    assert back.weights.tobytes() == m.weights.tobytes()
    assert back.bias == m.bias and back.feature_names == m.feature_names
    assert set(m.to_dict()) == {"feature_names", "weights", "bias", "threshold"}
