"""Logistic regression trained by full-batch gradient descent.

The model exposes the gradient of its cross-entropy loss with respect to the
*input* features, which is all FGSM needs.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, as_matrix
from .errors import ConfigError, DataError, NumericError

log = logging.getLogger(__name__)

PROB_CLAMP = 1e-12


def sigmoid(z):
    """Numerically stable logistic function; works on scalars and arrays."""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 1000
    l2_lambda: float = 1e-4
    seed: int = 0
    tolerance: float = 1e-8
    # Gradient descent in standardized coordinates; the fitted model still
    # consumes raw features and minimizes the same objective.
    precondition: bool = False

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.l2_lambda < 0:
            raise ConfigError("l2_lambda must be non-negative")
        if self.tolerance < 0:
            raise ConfigError("tolerance must be non-negative")


@dataclass
class TrainTrace:
    losses: list[float] = field(default_factory=list)
    stop_reason: str = ""

    @property
    def epochs_run(self) -> int:
        return max(len(self.losses) - 1, 0)


@dataclass(eq=False)
class LinearModel:
    weights: np.ndarray
    bias: float
    feature_names: tuple[str, ...]
    threshold: float = 0.5
    trace: TrainTrace | None = field(default=None, repr=False)

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=np.float64).reshape(-1)
        self.bias = float(self.bias)
        self.feature_names = tuple(self.feature_names)
        if len(self.weights) != len(self.feature_names):
            raise DataError(
                f"{len(self.weights)} weights for {len(self.feature_names)} feature names")
        if not (np.all(np.isfinite(self.weights)) and math.isfinite(self.bias)):
            raise NumericError("model parameters must be finite")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError(f"threshold must be in (0, 1), got {self.threshold}")
        self.weights.flags.writeable = False

    @property
    def n_features(self) -> int:
        return len(self.weights)

    def decision_function(self, X) -> np.ndarray:
        return as_matrix(X, self.n_features) @ self.weights + self.bias

    def predict_proba(self, X):
        """Fraud probability for one vector (returns a float) or a batch of rows."""
        p = sigmoid(self.decision_function(X))
        return float(p[0]) if np.ndim(X) == 1 else p

    def classify(self, X):
        p = self.predict_proba(X)
        if np.ndim(X) == 1:
            return int(p >= self.threshold)
        return (p >= self.threshold).astype(np.int64)

    def predict(self, X) -> np.ndarray:
        return np.asarray(self.classify(as_matrix(X, self.n_features)))

    def loss(self, X, y):
        """Binary cross-entropy per row; a float for a single vector."""
        p = np.clip(sigmoid(self.decision_function(X)), PROB_CLAMP, 1.0 - PROB_CLAMP)
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        out = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
        return float(out[0]) if np.ndim(X) == 1 else out

    def input_gradient(self, X, y):
        """d loss / d x, i.e. ``(p - y) * weights`` row by row."""
        p = sigmoid(self.decision_function(X))
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        g = (p - y)[:, None] * self.weights[None, :]
        return g[0] if np.ndim(X) == 1 else g

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "weights": [float(w) for w in self.weights],
            "bias": self.bias,
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        return cls(np.array(d["weights"], dtype=np.float64), d["bias"],
                   tuple(d["feature_names"]), d.get("threshold", 0.5))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "LinearModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def predict_proba(m: LinearModel, x):
    return m.predict_proba(x)


def classify(m: LinearModel, x):
    return m.classify(x)


def bce_loss(m: LinearModel, x, y):
    return m.loss(x, y)


def input_gradient(m: LinearModel, x, y):
    return m.input_gradient(x, y)


def _objective(p, pos, w, l2):
    """Mean cross-entropy of probabilities ``p`` (``pos`` marks fraud rows)
    plus the L2 penalty on raw weights ``w``."""
    p = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    nll = -(np.log(p[pos]).sum() + np.log1p(-p[~pos]).sum()) / len(p)
    return float(nll + 0.5 * l2 * np.dot(w, w))


def train(ds: Dataset, cfg: TrainConfig = TrainConfig()) -> LinearModel:
    """Fit by full-batch gradient descent on mean cross-entropy plus an L2 penalty.

    Starts from the zero model and stops after ``cfg.epochs`` steps, or as
    soon as a step improves the objective by less than ``cfg.tolerance``. A
    step that increases the objective is discarded, so the returned model never
    scores worse than the zero model (ln 2).
    """
    ds.require_both_classes()
    X = ds.X
    y = ds.y.astype(np.float64)
    n, d = X.shape
    if cfg.precondition:
        mu = X.mean(axis=0)
        sigma = X.std(axis=0)
        sigma[sigma == 0] = 1.0
    else:
        mu, sigma = np.zeros(d), np.ones(d)
    Z = (X - mu) / sigma if cfg.precondition else X

    def to_raw(v, c):
        return v / sigma, c - float(np.dot(v, mu / sigma))

    v, c = np.zeros(d), 0.0
    pos = ds.y == 1
    p = np.full(n, 0.5)
    trace = TrainTrace()
    loss = _objective(p, pos, v, cfg.l2_lambda)
    trace.losses.append(loss)
    for _ in range(cfg.epochs):
        resid = p - y
        gv = Z.T @ resid / n + cfg.l2_lambda * v / (sigma * sigma)
        gc = float(resid.mean())
        with np.errstate(over="ignore", invalid="ignore"):
            v_new, c_new = v - cfg.learning_rate * gv, c - cfg.learning_rate * gc
            p_new = sigmoid(Z @ v_new + c_new)
            new_loss = _objective(p_new, pos, v_new / sigma, cfg.l2_lambda)
        if not math.isfinite(new_loss) or not np.all(np.isfinite(v_new)):
            raise NumericError(
                f"non-finite loss after {trace.epochs_run} epochs; "
                f"learning_rate={cfg.learning_rate} is probably too high")
        if new_loss > loss:
            trace.stop_reason = "loss increased"
            log.warning("training stopped after %d epochs: loss increased "
                        "(learning_rate=%g may be too high)", trace.epochs_run, cfg.learning_rate)
            break
        v, c, p = v_new, c_new, p_new
        improvement = loss - new_loss
        loss = new_loss
        trace.losses.append(loss)
        if improvement < cfg.tolerance:
            trace.stop_reason = "converged"
            break
    else:
        trace.stop_reason = "max epochs"
    w, b = to_raw(v, c)
    return LinearModel(w, b, ds.feature_names, trace=trace)
