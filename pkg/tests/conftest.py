"""Shared instance factories for the test batteries."""
from __future__ import annotations

import numpy as np
import pytest

from rwgd import (
    BernoulliIndependent,
    CategoricalSingle,
    Dataset,
    MomentContext,
    build_weighted_problem,
)
from rwgd.moments import second_moment_step_limit
from rwgd.schedules import Constant, Harmonic
from rwgd.weighting import analytic_moments


def random_dataset(rng, n, d, dependent_rows=False):
    """Random small instance; dependent_rows forces rank < n so the residual
    is generically non-zero (non-realizable case). Resamples until the design
    is decently conditioned, otherwise the Neumann-series tests crawl."""
    while True:
        x = rng.standard_normal((n, d))
        if dependent_rows:
            # overwrite one row with a combination of the others
            coeffs = rng.standard_normal(n - 1)
            x[-1] = coeffs @ x[:-1]
        s = np.linalg.svd(x, compute_uv=False)
        nonzero = s[s > 1e-9 * s[0]]
        if nonzero[-1] >= 0.35 * s[0]:
            break
    y = rng.standard_normal(n)
    return Dataset(x, y)


def random_scheme(rng, n, kind=None):
    kind = kind or rng.choice(["categorical", "bernoulli"])
    if kind == "categorical":
        p = rng.uniform(0.2, 1.0, n)
        return CategoricalSingle(p / p.sum())
    return BernoulliIndependent(rng.uniform(0.3, 0.95, n))


def admissible_context(dataset, scheme, frac=0.5, harmonic=False):
    """MomentContext whose step size sits at `frac` of the tightest of the
    mean-recursion and second-moment step bounds."""
    mom = analytic_moments(scheme)
    wp = build_weighted_problem(dataset, mom.m2_diag)
    limit = min(1.0 / wp.norm_xx_hat, second_moment_step_limit(wp, mom.sigma_d))
    alpha = frac * limit
    sched = Harmonic(alpha) if harmonic else Constant(alpha)
    return wp, mom, MomentContext(wp, mom.sigma_d, sched)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
