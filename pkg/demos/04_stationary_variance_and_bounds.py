"""Long-run variance under constant steps and the bounds that control it.

With linearly dependent rows the residual cannot vanish, so the iterates keep
diffusing forever; their second moment settles at a computable limit. The
demo evaluates the limit, its convergence envelope, and the variance ceiling.
"""
import numpy as np

from rwgd import (
    CategoricalSingle,
    Constant,
    Dataset,
    MomentContext,
    build_weighted_problem,
    propagate,
    stationary_second_moment,
)
from rwgd.bounds import second_moment_envelope, var_constants, variance_ceiling
from rwgd.weighting import analytic_moments

x = np.array([[1.0, 0.5], [0.3, 1.2], [1.3, 1.7]])  # third row makes rank 2 < n
y = np.array([1.0, -2.0, 0.5])
ds = Dataset(x, y)
scheme = CategoricalSingle(np.array([0.5, 0.3, 0.2]))
mom = analytic_moments(scheme)
wp = build_weighted_problem(ds, mom.m2_diag)
print("residual norm (non-realizable):", np.linalg.norm(wp.residual))

ctx = MomentContext(wp, mom.sigma_d, Constant(0.005))
limit = stationary_second_moment(ctx)
print("stationary second moment:\n", np.round(limit, 8))
print("ceiling on its norm     :", variance_ceiling(ctx))
print("actual norm             :", np.linalg.norm(limit, 2))

c2 = var_constants(ctx, np.zeros(2))["c2"]
states = propagate(ctx, -wp.w_hat, 5000)
print("\nconvergence towards the limit (deviation vs envelope):")
for k in (10, 100, 1000, 5000):
    dev = np.linalg.norm(states[k].a - limit, 2)
    env = second_moment_envelope(ctx, c2, k)
    print(f"  k = {k:5d}  deviation {dev:.3e}  envelope {env:.3e}")

print("\nsmaller steps shrink the limit (variance scales with alpha):")
for alpha in (0.005, 0.002, 0.001):
    ctx_a = MomentContext(wp, mom.sigma_d, Constant(alpha))
    print(f"  alpha = {alpha}  ||limit|| = "
          f"{np.linalg.norm(stationary_second_moment(ctx_a), 2):.3e}")
