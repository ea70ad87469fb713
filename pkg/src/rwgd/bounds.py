"""Closed-form theoretical quantities: assumption guards, convergence-rate
bounds and their explicit constants, the contraction rate of coupled
trajectories, the point-mass step/iteration budget, the asymptotic risk
sandwich, the condition-number speedup, and the long-run variance ceiling.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionError
from .linalg import (
    Dataset,
    WeightedProblem,
    build_weighted_problem,
    kernel_projector,
    pseudo_inverse,
    sigma_min_plus,
    spectral_norm,
)
from .moments import MomentContext, second_moment_step_limit, stationary_second_moment
from .schedules import (
    Constant,
    Harmonic,
    StepSchedule,
    schedule_diverges,
    schedule_prefix,
    schedule_sup,
)
from .weighting import WeightingScheme, analytic_moments, support_bound

Array = np.ndarray


# ---------------------------------------------------------------------------
# special constants, evaluated by truncated series with explicit tail control


def euler_gamma_series(n_terms: int = 200_000) -> float:
    """Euler-Mascheroni constant from H_N - log N with Euler-Maclaurin tail."""
    h = math.fsum(1.0 / k for k in range(1, n_terms + 1))
    return h - math.log(n_terms) - 0.5 / n_terms + 1.0 / (12.0 * n_terms**2)


def zeta_series(s: float, n_terms: int = 20_000) -> float:
    """Riemann zeta(s) for s > 1 by direct summation plus integral tail
    correction; the neglected remainder is O(n_terms^{-s-3})."""
    if not s > 1.0:
        raise ValueError("zeta series requires s > 1")
    n = n_terms
    head = math.fsum(k ** (-s) for k in range(1, n + 1))
    tail = n ** (1.0 - s) / (s - 1.0) - 0.5 * n ** (-s) + s / 12.0 * n ** (-s - 1.0)
    return head + tail


EULER_GAMMA = euler_gamma_series()


# ---------------------------------------------------------------------------
# assumption reporting


@dataclass(frozen=True)
class AssumptionResult:
    name: str
    passed: bool
    margin: float | None        # distance to the boundary where meaningful
    detail: str = ""


@dataclass(frozen=True)
class BoundReport:
    """A named bound value (or several), the spectral/moment inputs it was
    computed from, and the assumption checks that qualify it."""

    name: str
    values: dict[str, float]
    inputs: dict[str, float] = field(default_factory=dict)
    assumptions: tuple[AssumptionResult, ...] = ()

    def passed(self, name: str) -> bool:
        for a in self.assumptions:
            if a.name == name:
                return a.passed
        raise KeyError(name)

    def all_passed(self) -> bool:
        return all(a.passed for a in self.assumptions)

    def to_json(self) -> str:
        payload = {
            "name": self.name,
            "values": {k: _jsonable(v) for k, v in self.values.items()},
            "inputs": {k: _jsonable(v) for k, v in self.inputs.items()},
            "assumptions": [
                {
                    "name": a.name,
                    "passed": a.passed,
                    "margin": _jsonable(a.margin) if a.margin is not None else None,
                    "detail": a.detail,
                }
                for a in self.assumptions
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def _jsonable(v):
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def assumption_check(
    wp: WeightedProblem,
    scheme: WeightingScheme,
    schedule: StepSchedule,
    w1: Array | None = None,
    tau: float | None = None,
) -> BoundReport:
    """Measure every standing assumption and report pass/fail with margins.

    Checks: sup alpha ||X^t M2 X|| < 1, divergence of the step-size series
    (by schedule variant), non-singular M2, the orthogonal start, the
    second-moment contraction step bound, and the compact-support condition
    alpha tau^2 ||X^t X|| < 2.
    """
    mom = analytic_moments(scheme)
    sigma_d = mom.sigma_d
    sup = schedule_sup(schedule)
    results: list[AssumptionResult] = []

    v = sup * wp.norm_xx_hat
    results.append(
        AssumptionResult("step_size_bound", v < 1.0, 1.0 - v,
                         f"sup alpha * ||X^t M2 X|| = {v:.6g}")
    )
    div = schedule_diverges(schedule)
    results.append(
        AssumptionResult("step_sum_diverges", div, None,
                         "sum alpha_k = inf by schedule variant" if div
                         else "explicit finite schedule: sum alpha_k < inf")
    )
    m2_min = float(np.min(wp.m2_diag))
    results.append(
        AssumptionResult("m2_nonsingular", m2_min > 0.0, m2_min,
                         f"min M2_ii = {m2_min:.6g}")
    )
    if w1 is not None:
        leak = float(np.linalg.norm(wp.kernel_projector() @ np.asarray(w1, float)))
        ok = leak <= 1e-10 * (1.0 + float(np.linalg.norm(w1)))
        results.append(
            AssumptionResult("start_orthogonal", ok, leak,
                             f"kernel component of w1 has norm {leak:.3e}")
        )
    limit = second_moment_step_limit(wp, sigma_d)
    results.append(
        AssumptionResult("second_moment_step_bound", sup < limit, limit - sup,
                         f"sup alpha = {sup:.6g}, limit = {limit:.6g}")
    )
    if tau is None:
        tau = support_bound(scheme)
    if tau is None:
        results.append(
            AssumptionResult("compact_support", False, None,
                             "weighting support is unbounded (no tau declared)")
        )
    else:
        v2 = sup * tau**2 * wp.norm_xx
        results.append(
            AssumptionResult("compact_support", v2 < 2.0, 2.0 - v2,
                             f"alpha * tau^2 * ||X^t X|| = {v2:.6g}")
        )

    inputs = {
        "norm_xx_hat": wp.norm_xx_hat,
        "norm_xx": wp.norm_xx,
        "sigma_min_plus_xx_hat": wp.sigma_min_plus_xx_hat,
        "norm_sigma_d": float(np.linalg.norm(sigma_d, 2)),
        "sup_alpha": sup,
    }
    return BoundReport("assumption_check", {}, inputs, tuple(results))


def _require(report: BoundReport, *names: str) -> None:
    for name in names:
        for a in report.assumptions:
            if a.name == name and not a.passed:
                raise AssumptionError(f"assumption '{name}' fails: {a.detail}")


# ---------------------------------------------------------------------------
# rate bounds


def gd_rate_bound(wp: WeightedProblem, schedule: StepSchedule, k: int, w1: Array) -> float:
    """Deterministic descent envelope exp(-sigma_min^+(X^t X) sum alpha) ||w1 - X^+ Y||."""
    if schedule_sup(schedule) * wp.norm_xx >= 1.0:
        raise AssumptionError("step sizes violate sup alpha * ||X^t X|| < 1")
    target = pseudo_inverse(wp.x) @ wp.y
    sigma = sigma_min_plus(wp.x.T @ wp.x)
    total = float(np.sum(schedule_prefix(schedule, k)))
    return math.exp(-sigma * total) * float(np.linalg.norm(np.asarray(w1, float) - target))


def mean_rate_bound(ctx: MomentContext, k: int, w1: Array) -> float:
    """First-moment envelope exp(-sigma_min^+(X^t M2 X) sum alpha) ||w1 - w_hat||."""
    sigma = ctx.wp.sigma_min_plus_xx_hat
    total = float(np.sum(schedule_prefix(ctx.schedule, k)))
    start = float(np.linalg.norm(np.asarray(w1, float) - ctx.wp.w_hat))
    return math.exp(-sigma * total) * start


def var_constants(ctx: MomentContext, w1: Array) -> dict[str, float | None]:
    """Explicit constants of the second-moment convergence statements.

    c0 bounds the transient (initial outer product plus remainder
    accumulation); c1 is the harmonic-step constant built from zeta and the
    Euler-Mascheroni constant; c2 = c0 + ||stationary limit|| drives the
    constant-step envelope. c1/c2 are None when the schedule variant does not
    define them.
    """
    ctx.require_step_limit()
    e1 = np.asarray(w1, float) - ctx.wp.w_hat
    r_norm = float(np.linalg.norm(ctx.residual))
    c0 = float(e1 @ e1) + 2.0 * ctx.wp.norm_x**3 * ctx.norm_sigma_d * float(np.linalg.norm(e1)) * r_norm

    c1: float | None = None
    c2: float | None = None
    if isinstance(ctx.schedule, Harmonic):
        alpha = ctx.schedule.alpha
        sigma = ctx.wp.sigma_min_plus_xx_hat
        c1 = c0 * (1.0 + alpha * math.pi**2 / 6.0) + (
            ctx.wp.norm_x**2
            * ctx.norm_sigma_d
            * r_norm**2
            * math.exp(alpha * sigma * EULER_GAMMA)
            * alpha
            * zeta_series(2.0 - alpha * sigma)
        )
    if isinstance(ctx.schedule, Constant):
        c2 = c0 + float(np.linalg.norm(stationary_second_moment(ctx), 2))
    return {"c0": c0, "c1": c1, "c2": c2}


def second_moment_envelope(ctx: MomentContext, c2: float, k: int) -> float:
    """Constant-step deviation envelope C2 (2 + k alpha^2) exp(-alpha sigma (k-1))
    bounding ||A_{k+1} - limit|| (k counted as the number of steps taken)."""
    alpha = ctx.constant_alpha()
    sigma = ctx.wp.sigma_min_plus_xx_hat
    return c2 * (2.0 + k * alpha**2) * math.exp(-alpha * sigma * (k - 1))


def harmonic_envelope(ctx: MomentContext, c1: float, k: int) -> float:
    """Harmonic-step envelope C1 k^{-alpha sigma} bounding ||A_{k+1}||."""
    if not isinstance(ctx.schedule, Harmonic):
        raise AssumptionError("harmonic envelope requires an alpha/k schedule")
    alpha = ctx.schedule.alpha
    sigma = ctx.wp.sigma_min_plus_xx_hat
    return c1 * k ** (-alpha * sigma)


def gmc_rate(wp: WeightedProblem, alpha: float, tau: float, q: float) -> tuple[float, float]:
    """Contraction of coupled trajectories:
    returns (bound on r_q^q, bound on r_q) with
    r_q^q <= 1 - alpha (2 - alpha tau^2 ||X^t X||) sigma_min^+(X^t M2 X)."""
    if q < 1:
        raise ValueError("q must be at least 1")
    c = alpha * tau**2 * wp.norm_xx
    if c >= 2.0:
        raise AssumptionError(
            f"compact-support step condition alpha tau^2 ||X^t X|| < 2 fails (got {c:.6g})"
        )
    if alpha * wp.norm_xx_hat >= 1.0:
        raise AssumptionError("step size violates alpha * ||X^t M2 X|| < 1")
    bound_q = 1.0 - alpha * (2.0 - c) * wp.sigma_min_plus_xx_hat
    bound_q = min(max(bound_q, 0.0), 1.0)
    return bound_q, bound_q ** (1.0 / q)


def conv_point_budget(
    ctx: MomentContext,
    tau: float,
    epsilon: float,
    c3: float,
) -> tuple[float, float]:
    """Step-size ceiling and iteration floor that keep the iterate law within
    epsilon (in 2-Wasserstein distance) of a point mass at w_hat.

    c3 is the prefactor of the stationary-convergence bound; it has no closed
    form and must be supplied by the caller.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    r_norm = float(np.linalg.norm(ctx.residual))
    if r_norm <= 1e-12:
        raise AssumptionError(
            "realizable case: the point-mass budget does not apply; the iterate "
            "law already collapses to a point mass at w_hat"
        )
    sigma = ctx.wp.sigma_min_plus_xx_hat
    d = ctx.wp.d
    alpha_max = sigma * epsilon**2 / (d * ctx.norm_sigma_d * ctx.wp.norm_xx * r_norm)
    alpha = ctx.constant_alpha()
    c = alpha * tau**2 * ctx.wp.norm_xx
    if c >= 2.0:
        raise AssumptionError(
            f"compact-support step condition alpha tau^2 ||X^t X|| < 2 fails (got {c:.6g})"
        )
    log_term = math.log(2.0 * c3 / epsilon)
    if log_term <= 0.0:
        k_min = 1.0
    else:
        k_min = max(1.0, 2.0 * log_term / (alpha * (2.0 - c) * sigma))
    return alpha_max, k_min


def asym_risk_bounds(
    wp: WeightedProblem,
    w_star: Array,
    sigma_eps: Array,
) -> tuple[float, float]:
    """Sandwich for the long-run risk lim_k E ||w* - w_k||^2 under label noise.

    Lower endpoint: squared kernel bias plus the variance of the weighted
    estimator; upper endpoint adds the residual-variance trace. Stated for
    ||X|| = 1; other scales are normalized internally by the consistent model
    rescale (X, Y, eps) -> (X, Y, eps)/s, which divides the noise covariance
    by s^2 and leaves w* and the lower endpoint unchanged. Warns when it does.
    """
    w_star = np.asarray(w_star, dtype=float)
    sigma_eps = np.asarray(sigma_eps, dtype=float)
    n = wp.n
    if sigma_eps.shape != (n, n):
        raise ValueError("sigma_eps must be n x n")
    if not np.allclose(sigma_eps, sigma_eps.T, atol=1e-9):
        raise ValueError("sigma_eps must be symmetric")
    eigs = np.linalg.eigvalsh(0.5 * (sigma_eps + sigma_eps.T))
    if eigs.min() < -1e-9 * max(1.0, eigs.max()):
        raise ValueError("sigma_eps must be positive semi-definite")

    scale = wp.norm_x
    if abs(scale - 1.0) > 1e-9:
        warnings.warn(
            f"risk sandwich requires ||X|| = 1; rescaling the model equation by 1/{scale:.6g}",
            stacklevel=2,
        )
        data = Dataset(wp.x / scale, wp.y / scale)
        wp = build_weighted_problem(data, wp.m2_diag)
        sigma_eps = sigma_eps / scale**2

    x = wp.x
    g = pseudo_inverse(wp.x_hat) @ np.diag(np.sqrt(wp.m2_diag))
    bias = kernel_projector(x) @ w_star
    lower = float(bias @ bias) + float(np.trace(g @ sigma_eps @ g.T))
    slack_op = np.eye(n) - x @ g
    upper = lower + float(np.trace(slack_op @ sigma_eps @ slack_op.T))
    return lower, upper


def condition_speedup(wp_uniform: WeightedProblem, wp_weighted: WeightedProblem) -> tuple[float, float]:
    """Ratio of effective inverse condition numbers (weighted over uniform)
    and its ceiling max M2_ii / min M2_ii."""
    if wp_uniform.x.shape != wp_weighted.x.shape or not np.array_equal(wp_uniform.x, wp_weighted.x):
        raise ValueError("both problems must share the same design matrix")
    xx = wp_uniform.x.T @ wp_uniform.x
    base = sigma_min_plus(xx) / spectral_norm(xx)
    weighted = wp_weighted.sigma_min_plus_xx_hat / wp_weighted.norm_xx_hat
    ratio = weighted / base
    m2 = wp_weighted.m2_diag
    bound = float(np.max(m2) / np.min(m2))
    assert ratio <= bound + 1e-9, f"speedup ratio {ratio} exceeds its ceiling {bound}"
    return ratio, bound


def variance_ceiling(ctx: MomentContext) -> float:
    """Upper bound for the spectral norm of the stationary second moment:
    the chain alpha ||X^t X|| ||Sigma_D|| / sigma * ||r||^2, its step-bound
    relaxation, and ||r||^2 / ||X||^2; the minimum of the three applies."""
    ctx.require_step_limit()
    alpha = ctx.constant_alpha()
    sigma = ctx.wp.sigma_min_plus_xx_hat
    nx = ctx.wp.norm_x
    nsd = ctx.norm_sigma_d
    r_sq = float(ctx.residual @ ctx.residual)
    v1 = alpha * ctx.wp.norm_xx * nsd / sigma * r_sq
    v2 = nx**2 * nsd / (sigma**2 + nx**4 * nsd) * r_sq
    v3 = r_sq / nx**2
    ceiling = min(v1, v2, v3)
    limit_norm = float(np.linalg.norm(stationary_second_moment(ctx), 2))
    assert limit_norm <= ceiling + 1e-9 * (1.0 + ceiling), (
        f"stationary norm {limit_norm} exceeds its ceiling {ceiling}"
    )
    return ceiling
