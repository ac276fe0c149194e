"""
Training the two fraud detectors
================================

A synthetic, heavily imbalanced transaction table is split, the training
part is rebalanced with SMOTE, and both a logistic regression and a random
forest are fitted and scored on the untouched test part.
"""
import numpy as np

from fraudadv import (ForestConfig, SmoteConfig, SplitSpec, TrainConfig, generate_synthetic,
                      smote_oversample, stratified_split, train, train_forest)
from fraudadv.metrics import evaluate

# 20,000 rows, 1% fraud, 10 features; the fraud mean sits 4 units away
data = generate_synthetic(20000, 0.01, 10, 4.0, seed=7)
print("class counts:", data.class_counts())

# split first, then oversample only the training part
train_set, test_set = stratified_split(data, SplitSpec(train_fraction=0.8, seed=7))
balanced = smote_oversample(train_set, SmoteConfig(k_neighbors=5, target_ratio=1.0, seed=7))
print("after SMOTE:", balanced.class_counts())

# logistic regression by gradient descent; precondition=True runs the
# descent on standardized features but returns raw-feature weights
lr = train(balanced, TrainConfig(learning_rate=0.1, epochs=1000, precondition=True))
print("LR loss: %.4f -> %.4f after %d epochs"
      % (lr.trace.losses[0], lr.trace.losses[-1], lr.trace.epochs_run))
print("LR", evaluate(lr, test_set.X, test_set.y).row())

# a smaller forest keeps the demo quick
rf = train_forest(balanced, ForestConfig(n_trees=25, seed=7))
report = evaluate(rf, test_set.X, test_set.y)
print("RF", report.row())
print("RF confusion matrix:", report.matrix.to_dict())

# the LR weights are directly readable: the sign says which way a feature pushes
for name, w in zip(lr.feature_names, np.round(lr.weights, 3)):
    print(f"  {name:>4s} {w:+.3f}")
