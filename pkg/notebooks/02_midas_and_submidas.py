"""
MIDAS and its subsampled variant on the cold-start target
=========================================================

The policy starts far from the target (q0 is centred at the origin, the
target at 5/sqrt(d)). We follow the sliced Wasserstein distance between
the weighted particles and an exact reference sample as the budget grows.
"""

import time

import numpy as np

from midas import (
    RunConfig,
    WeightedSampleSet,
    current_policy,
    default_exploration,
    from_store,
    make_toy_target,
    reference_sample,
    run_sampler,
    sliced_w2,
)

d = 2
target = make_toy_target("coldstart", d)
q0 = default_exploration("coldstart", d)
ref = reference_sample(target, 10_000, np.random.default_rng(1))
ref = WeightedSampleSet(ref, np.ones(len(ref)))

for algorithm in ("midas", "submidas"):
    curve = []

    def checkpoint(store, used):
        sw = sliced_w2(from_store(store), ref, 100, np.random.default_rng(2))
        curve.append((used, np.log(sw)))

    cfg = RunConfig(eta=1.0, budget=20_000, batch=300, algorithm=algorithm, checkpoint_every=4000)
    t0 = time.perf_counter()
    store = run_sampler(cfg, target, q0, np.random.default_rng(0), on_checkpoint=checkpoint)
    print(f"\n{algorithm}: {len(store)} particles in {time.perf_counter() - t0:.1f}s")
    for used, v in curve:
        print(f"  budget {used:6d}   log SW {v:7.3f}")

# the final policy is itself a density estimate of the target
policy = current_policy(store, q0)
x = np.array([[5 / np.sqrt(2)] * 2, [0.0, 0.0]])
print("\npolicy log density at the target mean and at the origin:", policy.log_density(x).round(2))
print("target log density (normalized):", target.normalized().log_unnorm(x).round(2))
