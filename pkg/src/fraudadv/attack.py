"""FGSM evasion against the logistic model and black-box transfer to other models.

Only fraud rows the source model already catches are attacked; the goal is
to push them across the decision boundary to "legitimate". Any object with a
batch ``predict(X) -> labels`` method can serve as a scoring or transfer
target.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .dataset import Dataset, Sample
from .errors import AttackError, ConfigError, DataError, NumericError
from .linear_model import LinearModel
from .metrics import MetricsReport, evaluate, transferability_rate


class Classifier(Protocol):
    def predict(self, X) -> np.ndarray: ...


@dataclass(frozen=True)
class AttackConfig:
    epsilon: float = 2.2
    clip_min: Sequence[float] | float | None = None
    clip_max: Sequence[float] | float | None = None
    immutable_features: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ConfigError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.clip_min is not None and self.clip_max is not None:
            if np.any(np.asarray(self.clip_min) > np.asarray(self.clip_max)):
                raise ConfigError("clip_min exceeds clip_max")
        object.__setattr__(self, "immutable_features",
                           tuple(int(i) for i in self.immutable_features))

    def with_epsilon(self, epsilon: float) -> "AttackConfig":
        return AttackConfig(epsilon, self.clip_min, self.clip_max, self.immutable_features)


def fgsm_perturb(gradient_fn: Callable, x, y, cfg: AttackConfig) -> tuple[np.ndarray, np.ndarray]:
    """One FGSM step: ``x* = x + eps * sign(grad_x J(x, y))``.

    ``x`` may be a single vector or a batch of rows (``y`` to match).
    ``sign(0)`` is 0 and immutable features never move; optional clipping is
    applied to ``x*`` last. Returns ``(perturbation, perturbed)``.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DataError("cannot perturb non-finite features")
    grad = np.asarray(gradient_fn(x, y), dtype=np.float64)
    if grad.shape != x.shape:
        raise NumericError(f"gradient shape {grad.shape} does not match input {x.shape}")
    if not np.all(np.isfinite(grad)):
        raise NumericError("gradient contains non-finite values")
    eta = cfg.epsilon * np.sign(grad)
    if cfg.immutable_features:
        eta[..., list(cfg.immutable_features)] = 0.0
    x_adv = x + eta
    if cfg.clip_min is not None or cfg.clip_max is not None:
        lo = -np.inf if cfg.clip_min is None else np.asarray(cfg.clip_min, dtype=np.float64)
        hi = np.inf if cfg.clip_max is None else np.asarray(cfg.clip_max, dtype=np.float64)
        x_adv = np.clip(x_adv, lo, hi)
        eta = x_adv - x
    return eta, x_adv


@dataclass(frozen=True, eq=False)
class AdversarialSample:
    index_in_test: int
    original: Sample
    perturbed_features: np.ndarray
    perturbation: np.ndarray
    source_pred_before: int
    source_pred_after: int

    def to_record(self) -> dict:
        return {
            "index_in_test": self.index_in_test,
            "original_features": [float(v) for v in self.original.features],
            "perturbed_features": [float(v) for v in self.perturbed_features],
            "perturbation": [float(v) for v in self.perturbation],
            "true_label": int(self.original.label),
            "source_pred_before": self.source_pred_before,
            "source_pred_after": self.source_pred_after,
        }

    @classmethod
    def from_record(cls, r: dict) -> "AdversarialSample":
        return cls(int(r["index_in_test"]),
                   Sample(np.array(r["original_features"], dtype=np.float64), int(r["true_label"])),
                   np.array(r["perturbed_features"], dtype=np.float64),
                   np.array(r["perturbation"], dtype=np.float64),
                   int(r["source_pred_before"]), int(r["source_pred_after"]))


@dataclass(eq=False)
class AdversarialSet:
    samples: list[AdversarialSample]
    epsilon: float
    source_model_id: str = "logistic_regression"
    created_from: str = "correctly classified fraud in test set"
    feature_names: tuple[str, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def indices(self) -> np.ndarray:
        return np.array([s.index_in_test for s in self.samples], dtype=np.int64)

    @property
    def perturbed(self) -> np.ndarray:
        d = len(self.feature_names)
        if not self.samples:
            return np.empty((0, d))
        return np.stack([s.perturbed_features for s in self.samples])

    @property
    def source_flipped(self) -> np.ndarray:
        return np.array([s.source_pred_after == 0 for s in self.samples], dtype=bool)

    def write_jsonl(self, path) -> None:
        """Header record first, then one record per sample."""
        header = {"epsilon": self.epsilon, "source_model_id": self.source_model_id,
                  "policy": self.created_from, "feature_names": list(self.feature_names)}
        with open(path, "w") as fh:
            fh.write(json.dumps(header) + "\n")
            for s in self.samples:
                fh.write(json.dumps(s.to_record()) + "\n")

    @classmethod
    def read_jsonl(cls, path) -> "AdversarialSet":
        with open(path) as fh:
            lines = [json.loads(line) for line in fh if line.strip()]
        if not lines:
            raise DataError(f"{path}: empty adversarial set file")
        h = lines[0]
        return cls([AdversarialSample.from_record(r) for r in lines[1:]], float(h["epsilon"]),
                   h.get("source_model_id", ""), h.get("policy", ""),
                   tuple(h.get("feature_names", ())))


@dataclass(frozen=True)
class TransferResult:
    attempted: int
    successful: int
    failed: int
    rate: float

    def to_dict(self) -> dict:
        return {"attempted": self.attempted, "successful": self.successful,
                "failed": self.failed, "rate": self.rate}


def _check_features(model, names: Sequence[str]) -> None:
    mnames = getattr(model, "feature_names", None)
    if mnames is not None and names and tuple(mnames) != tuple(names):
        raise DataError("model and data have different feature names")


def select_targets(model: Classifier, test: Dataset) -> np.ndarray:
    """Indices (in ``test`` order) of fraud rows that ``model`` labels as fraud."""
    if len(test) == 0:
        raise DataError("cannot select attack targets from an empty test set")
    pred = np.asarray(model.predict(test.X))
    return np.flatnonzero((test.y == 1) & (pred == 1))


def generate_adversarial_set(model: LinearModel, test: Dataset, cfg: AttackConfig,
                             targets: np.ndarray | None = None,
                             source_model_id: str = "logistic_regression") -> AdversarialSet:
    """Untargeted FGSM (ascending the loss of the true label) on each target row.

    ``targets`` defaults to :func:`select_targets`; pass a fixed list to
    compare several budgets on the same rows.
    """
    _check_features(model, test.feature_names)
    if targets is None:
        targets = select_targets(model, test)
    targets = np.asarray(targets, dtype=np.int64)
    if len(targets) == 0:
        raise AttackError("the model detects no fraud in the test set, so there is nothing to attack")
    X = test.X[targets]
    y = test.y[targets]
    before = model.predict(X)
    eta, x_adv = fgsm_perturb(model.input_gradient, X, y, cfg)
    after = model.predict(x_adv)
    samples = [
        AdversarialSample(int(i), Sample(X[k].copy(), int(y[k])), x_adv[k], eta[k],
                          int(before[k]), int(after[k]))
        for k, i in enumerate(targets)
    ]
    return AdversarialSet(samples, float(cfg.epsilon), source_model_id,
                          "correctly classified fraud in test set", test.feature_names)


def adversarial_test_set(test: Dataset, adv: AdversarialSet) -> Dataset:
    """Copy of ``test`` with every attacked row replaced by its perturbed features."""
    idx = adv.indices
    if len(idx) and (idx.min() < 0 or idx.max() >= len(test)):
        raise DataError("adversarial sample refers to a row outside the test set")
    for s in adv.samples:
        if not np.array_equal(test.X[s.index_in_test], s.original.features) or \
                test.y[s.index_in_test] != s.original.label:
            raise DataError(f"adversarial original not found at test row {s.index_in_test}")
    X = np.array(test.X)
    if len(idx):
        X[idx] = adv.perturbed
    return test.with_features(X)


def replace_and_score(model: Classifier, test: Dataset, adv: AdversarialSet) -> MetricsReport:
    """Metrics of ``model`` on the test set with attacked rows swapped in (labels kept)."""
    ds = adversarial_test_set(test, adv)
    return evaluate(model, ds.X, ds.y)


def transfer_attack(target: Classifier, adv: AdversarialSet,
                    only_source_successes: bool = True) -> TransferResult:
    """How many adversarial fraud rows ``target`` also lets through as legitimate.

    By default only rows that already fooled the source model are counted.
    """
    _check_features(target, adv.feature_names)
    keep = adv.source_flipped if only_source_successes else np.ones(len(adv), dtype=bool)
    attempted = int(keep.sum())
    if attempted == 0:
        raise AttackError("no adversarial samples to transfer"
                          + (" (none fooled the source model)" if only_source_successes else ""))
    pred = np.asarray(target.predict(adv.perturbed[keep]))
    successful = int(np.count_nonzero(pred == 0))
    return TransferResult(attempted, successful, attempted - successful,
                          transferability_rate(successful, attempted))
