"""End-to-end pipeline: data prep, baselines, FGSM attack, epsilon sweep, transfer.

:class:`Experiment` caches the prepared data and the two trained models, so
an attack, a sweep and a transfer evaluation all use the same split and the
same fitted models. Everything is derived from one master seed.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import time
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attack import (AdversarialSet, AttackConfig, TransferResult, generate_adversarial_set,
                     replace_and_score, select_targets, transfer_attack)
from .dataset import (LABEL_COLUMN, Dataset, SmoteConfig, SplitSpec, generate_synthetic, load_csv,
                      smote_oversample, stratified_split)
from .errors import ConfigError, FraudAdvError
from .forest import ForestConfig, RandomForestModel, train_forest
from .linear_model import LinearModel, TrainConfig, train
from .metrics import MetricsReport, evaluate

log = logging.getLogger(__name__)

DEFAULT_EPSILONS = tuple(round(0.2 * i, 10) for i in range(16))
SWEEP_HEADER = ("epsilon", "recall", "precision", "accuracy")


def derive_seed(master: int, label: str) -> int:
    """Stable 32-bit sub-seed for a named pipeline component."""
    digest = hashlib.sha256(f"{master}:{label}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


@dataclass(frozen=True)
class SyntheticSpec:
    n_total: int = 20000
    fraud_fraction: float = 0.01
    d: int = 10
    separation: float = 4.0

    @classmethod
    def parse(cls, text: str) -> "SyntheticSpec":
        """Parse ``"N,FRAC,D,SEP"``."""
        parts = [p.strip() for p in str(text).split(",")]
        if len(parts) != 4:
            raise ConfigError(f"synthetic spec must be N,FRAC,D,SEP; got {text!r}")
        try:
            return cls(int(parts[0]), float(parts[1]), int(parts[2]), float(parts[3]))
        except ValueError:
            raise ConfigError(f"synthetic spec must be N,FRAC,D,SEP; got {text!r}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    data_path: str | None = None
    label_column: str = LABEL_COLUMN
    synthetic: SyntheticSpec = SyntheticSpec()
    split: SplitSpec = SplitSpec()
    smote: SmoteConfig = SmoteConfig()
    use_smote: bool = True
    # raw-feature data such as the Kaggle set needs the preconditioned solver
    train: TrainConfig = TrainConfig(precondition=True)
    forest: ForestConfig = ForestConfig()
    attack: AttackConfig = AttackConfig()
    immutable_features: tuple[str, ...] = ()
    epsilon_list: tuple[float, ...] = DEFAULT_EPSILONS
    seed: int = 0
    out_dir: str = "results"
    n_jobs: int = 1

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilon_list)
        if not eps:
            raise ConfigError("epsilon_list must not be empty")
        if any(e < 0 for e in eps):
            raise ConfigError("epsilons must be non-negative")
        if any(b <= a for a, b in zip(eps, eps[1:])):
            raise ConfigError(f"epsilon_list must be strictly increasing, got {eps}")
        object.__setattr__(self, "epsilon_list", eps)
        object.__setattr__(self, "immutable_features", tuple(self.immutable_features))
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    def with_epsilon(self, epsilon: float) -> "ExperimentConfig":
        """Set the attack budget, adding it to ``epsilon_list`` if missing."""
        eps = sorted(set(self.epsilon_list) | {float(epsilon)})
        return dataclasses.replace(self, attack=self.attack.with_epsilon(float(epsilon)),
                                   epsilon_list=tuple(eps))

    def seeded(self) -> "ExperimentConfig":
        """Copy whose component seeds are fanned out from the master seed."""
        s = self.seed
        return dataclasses.replace(
            self,
            split=dataclasses.replace(self.split, seed=derive_seed(s, "split")),
            smote=dataclasses.replace(self.smote, seed=derive_seed(s, "smote")),
            train=dataclasses.replace(self.train, seed=derive_seed(s, "logistic_regression")),
            forest=dataclasses.replace(self.forest, seed=derive_seed(s, "random_forest")),
        )

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        # where results go must not change what they say
        del d["out_dir"]
        d["epsilon_list"] = list(self.epsilon_list)
        d["immutable_features"] = list(self.immutable_features)
        a = d["attack"]
        a["immutable_features"] = list(a["immutable_features"])
        for k in ("clip_min", "clip_max"):
            if a[k] is not None:
                a[k] = np.asarray(a[k], dtype=float).tolist()
        if self.data_path is not None:
            d.pop("synthetic")
        return d


@dataclass
class RunReport:
    config: dict
    clean_lr: dict | None = None
    clean_rf: dict | None = None
    adversarial: list[dict] = field(default_factory=list)
    sweep: list[dict] | None = None
    transfer: dict | None = None
    exemplar: dict | None = None
    timings: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        """The ``report.json`` payload (timings are written separately)."""
        return {
            "config": self.config,
            "clean_lr": self.clean_lr,
            "clean_rf": self.clean_rf,
            "adversarial": self.adversarial,
            "sweep": self.sweep,
            "transfer": self.transfer,
            "exemplar": self.exemplar,
        }


class Experiment:
    """Lazily prepares data and models for one :class:`ExperimentConfig`."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg.seeded()
        self.timings: dict[str, float] = {}
        self._data: Dataset | None = None
        self.train_set: Dataset | None = None
        self.train_balanced: Dataset | None = None
        self.test_set: Dataset | None = None
        self._lr: LinearModel | None = None
        self._rf: RandomForestModel | None = None
        self._targets: np.ndarray | None = None
        self._adv: dict[float, AdversarialSet] = {}
        self.report = RunReport(config=self.cfg.to_dict(), timings=self.timings)

    def _timed(self, key: str, fn, *args, **kwargs):
        t0 = time.perf_counter()
        out = fn(*args, **kwargs)
        self.timings[key] = self.timings.get(key, 0.0) + time.perf_counter() - t0
        return out

    # -- data ---------------------------------------------------------------
    def prepare(self) -> None:
        if self._data is not None:
            return
        cfg = self.cfg
        if cfg.data_path is not None:
            data = self._timed("load", load_csv, cfg.data_path, cfg.label_column)
        else:
            s = cfg.synthetic
            data = generate_synthetic(s.n_total, s.fraud_fraction, s.d, s.separation,
                                      derive_seed(cfg.seed, "synthetic"))
        data.require_both_classes()
        self._data = data
        self.train_set, self.test_set = self._timed("split", stratified_split, data, cfg.split)
        if cfg.use_smote:
            self.train_balanced = self._timed("smote", smote_oversample, self.train_set, cfg.smote)
        else:
            self.train_balanced = self.train_set
        log.info("data: %d rows (%d fraud); train %d -> %d after SMOTE; test %d",
                 len(data), data.class_counts()[1], len(self.train_set),
                 len(self.train_balanced), len(self.test_set))

    def attack_config(self, epsilon: float) -> AttackConfig:
        names = self.test_set.feature_names
        idx = []
        for f in self.cfg.immutable_features:
            if f not in names:
                raise ConfigError(f"immutable feature {f!r} is not a column of the data")
            idx.append(names.index(f))
        base = self.cfg.attack
        return AttackConfig(float(epsilon), base.clip_min, base.clip_max,
                            tuple(sorted(set(idx) | set(base.immutable_features))))

    # -- models -------------------------------------------------------------
    @property
    def lr(self) -> LinearModel:
        if self._lr is None:
            self.prepare()
            self._lr = self._timed("train_lr", train, self.train_balanced, self.cfg.train)
        return self._lr

    @property
    def rf(self) -> RandomForestModel:
        if self._rf is None:
            self.prepare()
            self._rf = self._timed("train_rf", train_forest, self.train_balanced,
                                   self.cfg.forest, self.cfg.n_jobs)
        return self._rf

    @property
    def targets(self) -> np.ndarray:
        if self._targets is None:
            self._targets = select_targets(self.lr, self.test_set)
        return self._targets

    def adversarial_set(self, epsilon: float) -> AdversarialSet:
        epsilon = float(epsilon)
        if epsilon not in self._adv:
            self._adv[epsilon] = self._timed(
                "attack", generate_adversarial_set, self.lr, self.test_set,
                self.attack_config(epsilon), self.targets)
        return self._adv[epsilon]

    # -- stages -------------------------------------------------------------
    def run_baseline(self, forest: bool = True) -> dict:
        self.prepare()
        r = self.report
        r.clean_lr = evaluate(self.lr, self.test_set.X, self.test_set.y).to_dict()
        if forest:
            r.clean_rf = evaluate(self.rf, self.test_set.X, self.test_set.y).to_dict()
        return {"clean_lr": r.clean_lr, "clean_rf": r.clean_rf}

    def score_attack(self, epsilon: float) -> tuple[AdversarialSet, MetricsReport]:
        adv = self.adversarial_set(epsilon)
        return adv, replace_and_score(self.lr, self.test_set, adv)

    def run_attack(self, epsilon: float) -> dict:
        """Adversarial LR metrics at one budget plus an exemplar perturbation table."""
        if float(epsilon) not in self.cfg.epsilon_list:
            raise ConfigError(f"epsilon {epsilon} is not in epsilon_list")
        adv, metrics = self.score_attack(epsilon)
        entry = self._adversarial_entry(adv, metrics)
        self.report.adversarial = [e for e in self.report.adversarial
                                   if e["epsilon"] != entry["epsilon"]]
        self.report.adversarial.append(entry)
        self.report.adversarial.sort(key=lambda e: e["epsilon"])
        self.report.exemplar = exemplar_record(adv, self.test_set.feature_names)
        return entry

    def run_epsilon_sweep(self) -> list[dict]:
        """One (epsilon, recall, precision, accuracy) row per configured budget.

        The same trained LR and the same target rows are reused across budgets.
        """
        rows = []
        adversarial = {e["epsilon"]: e for e in self.report.adversarial}
        for eps in self.cfg.epsilon_list:
            adv, m = self.score_attack(eps)
            rows.append({"epsilon": eps, "recall": m.recall, "precision": m.precision,
                         "accuracy": m.accuracy})
            adversarial[eps] = self._adversarial_entry(adv, m)
        self.report.adversarial = [adversarial[e] for e in sorted(adversarial)]
        self.report.sweep = rows
        return rows

    def run_transfer(self, epsilon: float, target=None) -> TransferResult:
        """Replay the source-successful adversarial rows against the forest (or ``target``)."""
        if float(epsilon) not in self.cfg.epsilon_list:
            raise ConfigError(f"epsilon {epsilon} is not in epsilon_list")
        adv = self.adversarial_set(epsilon)
        res = transfer_attack(self.rf if target is None else target, adv, True)
        self.report.transfer = {"epsilon": float(epsilon), "only_source_successes": True,
                                **res.to_dict()}
        return res

    def run_full(self) -> RunReport:
        eps = self.cfg.attack.epsilon
        self.run_baseline()
        self.run_epsilon_sweep()
        self.run_attack(eps)
        self.run_transfer(eps)
        return self.report

    @staticmethod
    def _adversarial_entry(adv: AdversarialSet, m: MetricsReport) -> dict:
        return {"epsilon": adv.epsilon, "n_targets": len(adv),
                "n_flipped": int(adv.source_flipped.sum()), "metrics": m.to_dict()}


def exemplar_record(adv: AdversarialSet, feature_names) -> dict | None:
    """Per-feature before/after table for the first target that fooled the model."""
    if not len(adv):
        return None
    flipped = np.flatnonzero(adv.source_flipped)
    s = adv.samples[int(flipped[0]) if len(flipped) else 0]
    return {
        "epsilon": adv.epsilon,
        "index_in_test": s.index_in_test,
        "source_pred_before": s.source_pred_before,
        "source_pred_after": s.source_pred_after,
        "features": [
            {"name": name, "before": float(b), "after": float(a), "perturbation": float(p)}
            for name, b, a, p in zip(feature_names, s.original.features,
                                     s.perturbed_features, s.perturbation)
        ],
    }


def run_baseline(cfg: ExperimentConfig) -> dict:
    return Experiment(cfg).run_baseline()


def run_attack(cfg: ExperimentConfig, epsilon: float) -> dict:
    exp = Experiment(cfg.with_epsilon(epsilon))
    exp.run_baseline(forest=False)
    return exp.run_attack(epsilon)


def run_epsilon_sweep(cfg: ExperimentConfig) -> list[dict]:
    exp = Experiment(cfg)
    exp.run_baseline(forest=False)
    return exp.run_epsilon_sweep()


def run_transfer(cfg: ExperimentConfig, epsilon: float) -> TransferResult:
    return Experiment(cfg.with_epsilon(epsilon)).run_transfer(epsilon)


def write_sweep_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for r in rows:
            w.writerow([f"{r[k]:.6f}" for k in SWEEP_HEADER])


def write_report(exp: Experiment, out_dir) -> list[Path]:
    """Write report.json, timings.json, sweep.csv, adversarial_set.jsonl and models/."""
    out = Path(out_dir)
    try:
        (out / "models").mkdir(parents=True, exist_ok=True)
        written = []
        path = out / "report.json"
        path.write_text(json.dumps(exp.report.to_dict(), indent=2) + "\n")
        written.append(path)
        path = out / "timings.json"
        path.write_text(json.dumps({k: round(v, 6) for k, v in sorted(exp.timings.items())},
                                   indent=2) + "\n")
        written.append(path)
        if exp.report.sweep is not None:
            path = out / "sweep.csv"
            write_sweep_csv(exp.report.sweep, path)
            written.append(path)
        eps = exp.cfg.attack.epsilon
        if eps in exp._adv:
            path = out / "adversarial_set.jsonl"
            exp._adv[eps].write_jsonl(path)
            written.append(path)
        if exp._lr is not None:
            path = out / "models" / "logistic_regression.json"
            exp._lr.save(path)
            written.append(path)
        if exp._rf is not None:
            path = out / "models" / "random_forest.json"
            exp._rf.save(path)
            written.append(path)
    except OSError as e:
        raise FraudAdvError(f"cannot write results to {out}: {e}") from e
    return written


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(hint, text: str):
    t = text.strip()
    h = str(hint)
    if "None" in h and t.lower() in ("none", "null", ""):
        return None
    if hint is bool:
        return _parse_bool(t)
    if hint is int:
        return int(t)
    if hint is float:
        return float(t)
    if hint is str or h == "str | None":
        return t
    if h.startswith("tuple[float"):
        return tuple(float(p) for p in t.split(",") if p.strip())
    if h.startswith("tuple[int"):
        return tuple(int(p) for p in t.split(",") if p.strip())
    if h.startswith("tuple[str"):
        return tuple(p.strip() for p in t.split(",") if p.strip())
    if "int | str" in h:
        return t if t == "sqrt" else int(t)
    if "int | None" in h:
        return int(t)
    if "Sequence[float]" in h:
        parts = [float(p) for p in t.split(",")]
        return parts[0] if len(parts) == 1 else tuple(parts)
    raise ValueError(f"unsupported field type {h}")


def apply_overrides(cfg: ExperimentConfig, values: dict[str, str]) -> ExperimentConfig:
    """Set dotted keys (``forest.n_trees``, ``seed``, ...) from string values."""
    def update(obj, path: list[str], text: str, full: str):
        hints = typing.get_type_hints(type(obj))
        name = path[0]
        if name not in hints:
            raise ConfigError(f"unknown config key {full!r}")
        if len(path) == 1:
            hint = hints[name]
            if hint is SyntheticSpec:
                value = SyntheticSpec.parse(text)
            elif dataclasses.is_dataclass(hint):
                raise ConfigError(f"config key {full!r} needs a sub-key")
            else:
                try:
                    value = _convert(hint, text)
                except ValueError as e:
                    raise ConfigError(f"bad value for {full!r}: {e}") from None
            return dataclasses.replace(obj, **{name: value})
        child = getattr(obj, name)
        if not dataclasses.is_dataclass(child):
            raise ConfigError(f"unknown config key {full!r}")
        return dataclasses.replace(obj, **{name: update(child, path[1:], text, full)})

    for key, text in values.items():
        cfg = update(cfg, key.split("."), text, key)
    return cfg


def read_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, str] = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values
