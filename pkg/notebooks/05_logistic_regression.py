"""
Bayesian logistic regression on waveform data
=============================================

The waveform generator produces 21 noisy features and three classes;
class 0 is labelled +1 and the other two -1. The posterior over
(w, log beta) is sampled with SubMIDAS and the predictive accuracy on the
held-out rows is compared across learning rates.
"""

import numpy as np

from midas import RunConfig, default_exploration, from_store, generate_waveform, logistic_posterior, run_sampler
from midas.logistic import predictive_accuracy, split_dataset

data = generate_waveform(5000, seed=0)
train, test = split_dataset(data, 400, split_seed=0)
print(f"train {len(train)} rows, test {len(test)} rows, positive rate {np.mean(train.labels > 0):.3f}")

target = logistic_posterior(train, a=1.0, b=0.01)
q0 = default_exploration("logistic", target.dim)

for eta in (0.25, 1.0):
    accs = []
    for seed in range(3):
        with np.errstate(over="ignore"):
            store = run_sampler(RunConfig(eta=eta, budget=60_000), target, q0, np.random.default_rng(seed))
        accs.append(predictive_accuracy(from_store(store), test))
    print(f"eta={eta:4.2f}: test accuracy {np.round(accs, 4)}  mean {np.mean(accs):.4f}")
