"""
Do the adversarial rows fool a random forest too?
=================================================

The forest never exposes a gradient.  The rows crafted against the logistic
model are handed to it unchanged; the transferability rate is the share of
rows that fooled the logistic model and also fool the forest.
"""
from fraudadv import ForestConfig
from fraudadv.experiment import Experiment, ExperimentConfig, SyntheticSpec

cfg = ExperimentConfig(synthetic=SyntheticSpec(20000, 0.01, 10, 4.0),
                       forest=ForestConfig(n_trees=25), seed=11)
exp = Experiment(cfg)

for eps in (0.6, 1.0, 2.0, 3.0):
    t = exp.run_transfer(eps)
    print(f"epsilon={eps:.1f}: {t.successful}/{t.attempted} transfer (rate {t.rate:.2f})")

# the rows that fooled neither model are the interesting failures
adv = exp.adversarial_set(3.0)
forest_says = exp.rf.predict(adv.perturbed)
print("rows flipped on LR but still caught by the forest:",
      int((adv.source_flipped & (forest_says == 1)).sum()))
