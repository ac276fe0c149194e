"""
One FGSM step against the logistic model
========================================

Every fraud row the model catches is pushed by ``epsilon`` along the sign of
the loss gradient.  For logistic regression that gradient is
``(p - y) * w``, so with ``y = 1`` every feature moves against its weight.
"""
import numpy as np

from fraudadv import (AttackConfig, SmoteConfig, SplitSpec, TrainConfig, generate_synthetic,
                      generate_adversarial_set, replace_and_score, smote_oversample,
                      stratified_split, train)
from fraudadv.metrics import evaluate

data = generate_synthetic(20000, 0.01, 10, 4.0, seed=7)
train_set, test_set = stratified_split(data, SplitSpec(seed=7))
balanced = smote_oversample(train_set, SmoteConfig(seed=7))
lr = train(balanced, TrainConfig(precondition=True))

clean = evaluate(lr, test_set.X, test_set.y)
print("clean   ", clean.row())

# attack with a budget equal to the class separation
adv = generate_adversarial_set(lr, test_set, AttackConfig(epsilon=4.0))
print(f"{len(adv)} detected fraud rows attacked, "
      f"{int(adv.source_flipped.sum())} now pass as legitimate")

# the attacked rows replace their originals; labels stay the same
attacked = replace_and_score(lr, test_set, adv)
print("attacked", attacked.row())

# every perturbation component is +-epsilon (or 0 where the gradient is 0)
s = adv.samples[0]
print("perturbation of the first target:", s.perturbation)
assert np.all(np.isin(np.abs(s.perturbation), [0.0, 4.0]))

# features that must not change (say, a timestamp) can be frozen
frozen = generate_adversarial_set(lr, test_set, AttackConfig(epsilon=4.0, immutable_features=(0,)))
print("with x1 frozen:", int(frozen.source_flipped.sum()), "rows flipped")

# the set round-trips through JSON lines
adv.write_jsonl("adversarial_set.jsonl")
print("wrote adversarial_set.jsonl")
