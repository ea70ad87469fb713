"""Minimum-norm least squares and the weighted problem.

Builds a small over-parametrized regression, shows that the pseudo-inverse
solution is the smallest minimizer, and assembles the weighted problem whose
minimizer the randomly weighted iterates will chase.
"""
import numpy as np

from rwgd import Dataset, build_weighted_problem, kernel_projector, min_norm_least_squares

rng = np.random.default_rng(1)

x = rng.standard_normal((2, 4))   # 2 observations, 4 parameters
y = rng.standard_normal(2)

w = min_norm_least_squares(x, y)
print("min-norm solution      :", np.round(w, 4))
print("fit residual           :", np.linalg.norm(x @ w - y))
print("kernel component       :", np.linalg.norm(kernel_projector(x) @ w))

# any kernel vector added to w fits equally well but has a larger norm
v = kernel_projector(x) @ rng.standard_normal(4)
w_other = w + v
print("alternative fit error  :", np.linalg.norm(x @ w_other - y))
print("norms (min-norm, other):", np.linalg.norm(w), np.linalg.norm(w_other))

# reweighting the rows moves the target: here row 1 counts four times as much
wp = build_weighted_problem(Dataset(x, y), np.array([4.0, 1.0]))
print("\nweighted minimizer     :", np.round(wp.w_hat, 4))
print("weighted normal eqs    :", np.linalg.norm(x.T @ (wp.m2_diag * wp.residual)))
print("residual (independent rows => realizable):", np.linalg.norm(wp.residual))
