"""Inspect two training-dynamics effects on a noisy mixture.

First, the objective trace: it should fall steeply for a couple of iterations
and flatten well before the iteration cap. Second, row sparsity of the
per-anchor projections: the mixture carries six pure-noise dimensions, and the
squared row penalty should null the projection rows belonging to them.

Run:  python demos/03_sparsity_and_convergence.py
"""

import numpy as np

from jpsh import Hyperparams, train
from jpsh.datasets import gaussian_mixture

train_fs = gaussian_mixture(400, 10, sep=3.0, seed=0)
hyper = Hyperparams(l=16, m=8, k=7, psi=7, T=20, lambda1=1.0, seed=0)
model, trace = train(train_fs, hyper, tol=0.0)

print("=== objective trace ===")
prev = None
for it, obj in enumerate(trace.objectives, start=1):
    drop = "" if prev is None else f"  ({(obj - prev) / prev:+.2e} rel)"
    print(f"iter {it:2d}: {obj:12.4f}{drop}")
    prev = obj

print("\n=== projection row norms ===")
row_norms = np.sqrt((model.P**2).sum(axis=2))  # (m anchors, d features)
mean_norm = row_norms.mean()
dead = row_norms < 1e-3 * mean_norm
print(f"rows below 1e-3 x mean norm: {dead.sum()} of {dead.size} "
      f"({100 * dead.mean():.1f}%)")

print("\nper-feature view (the class means live on features 0-3):")
per_feature_dead = dead.mean(axis=0)
for f in range(train_fs.d):
    bar = "#" * int(20 * (1 - per_feature_dead[f]))
    print(f"  feature {f}: live fraction {1 - per_feature_dead[f]:.2f} {bar}")
