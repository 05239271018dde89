"""
Kernels, toy targets and the exploration density
================================================

Every sampler mixes scaled kernels around past particles with a heavy
tailed exploration density q0. This script looks at each piece.
"""

import numpy as np

from midas import Kernel, default_exploration, make_toy_target, reference_sample
from midas.kernels import kernel_sample, scaled_density

rng = np.random.default_rng(0)

# both kernel families have identity covariance
for family in ("gaussian", "epanechnikov"):
    k = Kernel(family, 2)
    u = kernel_sample(k, rng, 50_000)
    print(f"{family:>12}: peak {k.peak:.4f}, sample cov diag {np.diag(np.cov(u.T)).round(3)}")

# K_b(x - c) = b^-d K((x - c) / b)
k = Kernel("gaussian", 1)
print("K_0.5 at its center:", float(scaled_density(k, 0.5, [1.0], [1.0])))

# the four toy targets; fourmodes is two-dimensional only
for kind, d in [("coldstart", 2), ("mixture", 2), ("anisotropic", 2), ("fourmodes", 2)]:
    t = make_toy_target(kind, d)
    x = reference_sample(t, 20_000, rng)
    q0 = default_exploration(kind, d)
    print(f"{kind:>12}: mean {x.mean(axis=0).round(2)}, std {x.std(axis=0).round(2)}, q0 {q0.family}")

# the unnormalized density can carry any constant
t = make_toy_target("coldstart", 2)
x = reference_sample(t, 3, rng)
print("log f_u shift under x1000:", (t.scaled(1000.0).log_unnorm(x) - t.log_unnorm(x)).round(6))
