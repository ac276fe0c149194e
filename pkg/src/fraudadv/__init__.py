"""FGSM attacks on tabular fraud detectors and their transfer to random forests."""
from .attack import (AdversarialSample, AdversarialSet, AttackConfig, TransferResult,
                     fgsm_perturb, generate_adversarial_set, replace_and_score, select_targets,
                     transfer_attack)
from .dataset import (Dataset, Sample, SmoteConfig, SplitSpec, generate_synthetic, load_csv,
                      smote_oversample, stratified_split)
from .errors import AttackError, ConfigError, DataError, FraudAdvError, NumericError
from .experiment import Experiment, ExperimentConfig, RunReport, write_report
from .forest import ForestConfig, RandomForestModel, best_split, gini, train_forest
from .linear_model import LinearModel, TrainConfig, sigmoid, train
from .metrics import (ConfusionMatrix, MetricsReport, confusion_matrix, summarize,
                      transferability_rate)

__version__ = "0.1.0"
