"""
Effect of the learning rate on a four-mode target
=================================================

Smaller eta flattens the importance weights w^eta before they enter the
mixture. We count the self-normalized mass the particles put on each of
the four modes and report the final log sliced Wasserstein distance.
"""

import numpy as np

from midas import (
    RunConfig,
    WeightedSampleSet,
    default_exploration,
    from_store,
    make_toy_target,
    reference_sample,
    run_sampler,
    sliced_w2,
)

modes = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]])
target = make_toy_target("fourmodes", 2)
q0 = default_exploration("fourmodes", 2)
ref = reference_sample(target, 10_000, np.random.default_rng(100))
ref = WeightedSampleSet(ref, np.ones(len(ref)))

print(" eta   seed   mode masses                 log SW")
for eta in (0.25, 0.5, 1.0):
    for seed in range(3):
        store = run_sampler(RunConfig(eta=eta, budget=30_000), target, q0, np.random.default_rng(seed))
        s = from_store(store)
        lab = np.argmin(((s.points[:, None] - modes) ** 2).sum(-1), axis=1)
        mass = np.bincount(lab, weights=s.normalized_weights, minlength=4)
        sw = sliced_w2(s, ref, 100, np.random.default_rng(seed))
        print(f"{eta:5.2f}   {seed:4d}   {np.array2string(mass, precision=3)}   {np.log(sw):7.3f}")
