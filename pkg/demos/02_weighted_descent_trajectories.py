"""Randomly weighted descent in action.

Single-point sampling (one random row per step) against full-batch descent on
the same data: the weighted run is noisy but tracks the same target, and with
the identity weighting it reproduces full-batch descent exactly.
"""
import numpy as np

from rwgd import (
    CategoricalSingle,
    Constant,
    Dataset,
    Identity,
    build_weighted_problem,
    run_trajectory,
)
from rwgd.weighting import analytic_moments

rng = np.random.default_rng(7)
x = rng.standard_normal((6, 3))
w_true = rng.standard_normal(3)
ds = Dataset(x, x @ w_true)

scheme = CategoricalSingle(np.full(6, 1 / 6))
wp = build_weighted_problem(ds, analytic_moments(scheme).m2_diag)
alpha = min(0.5 / wp.norm_xx_hat, 0.9 / wp.norm_xx)

sgd = run_trajectory(wp, scheme, Constant(alpha), np.zeros(3), 4000, seed=3)
print("single-point sampling:")
for k in (1, 10, 100, 1000, 4001):
    idx = np.where(sgd.iter_index == k)[0][0]
    print(f"  k = {k:5d}  distance to target = "
          f"{np.linalg.norm(sgd.iterates[idx] - wp.w_hat):.3e}")

wp_full = build_weighted_problem(ds, np.ones(6))
full = run_trajectory(wp_full, Identity(6), Constant(alpha), np.zeros(3), 200, seed=0)
print("\nfull batch, same step size:")
for k in (1, 50, 201):
    idx = np.where(full.iter_index == k)[0][0]
    print(f"  k = {k:5d}  distance to target = "
          f"{np.linalg.norm(full.iterates[idx] - wp_full.w_hat):.3e}")
