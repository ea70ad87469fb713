"""Exact propagation of the first and second moments of w_k - w_hat under the
weighting randomness.

With m_k = E[w_k - w_hat] and A_k = E[(w_k - w_hat)(w_k - w_hat)^t], the
dynamics marginalize to

    m_{k+1} = (I - alpha_k X^t M2 X) m_k
    A_{k+1} = S_{alpha_k}(A_k) + rho_k(m_k)

where S_alpha is an affine operator built from the weighted Gram matrix and
Sigma_D, and rho_k is a remainder expressible exactly through m_k. Both
recursions are exact (no approximation), which is what the enumeration oracle
in the montecarlo module verifies.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionError
from .linalg import WeightedProblem
from .schedules import Constant, StepSchedule, schedule_sup, schedule_value

Array = np.ndarray


def second_moment_step_limit(wp: WeightedProblem, sigma_d: Array) -> float:
    """Largest step size for which the second-moment linear part provably
    contracts: sigma / (sigma^2 + ||X||^4 ||Sigma_D||) with sigma the smallest
    non-zero singular value of the weighted Gram matrix."""
    sigma = wp.sigma_min_plus_xx_hat
    norm_sigma_d = float(np.linalg.norm(sigma_d, 2)) if sigma_d.size else 0.0
    return sigma / (sigma**2 + wp.norm_x**4 * norm_sigma_d)


@dataclass(frozen=True)
class MomentContext:
    """Everything the moment recursions need: the weighted problem, Sigma_D,
    and the step-size schedule. Construction enforces the basic step bound
    sup alpha * ||X^t M2 X|| < 1; the tighter contraction bound is checked by
    the operations that need it."""

    wp: WeightedProblem
    sigma_d: Array
    schedule: StepSchedule
    residual: Array = field(init=False)

    def __post_init__(self):
        sigma_d = np.asarray(self.sigma_d, dtype=float)
        if sigma_d.shape != (self.wp.n, self.wp.n):
            raise ValueError("Sigma_D must be n x n")
        if not np.allclose(sigma_d, sigma_d.T, atol=1e-9):
            raise ValueError("Sigma_D must be symmetric")
        object.__setattr__(self, "sigma_d", 0.5 * (sigma_d + sigma_d.T))
        sup = schedule_sup(self.schedule)
        if sup * self.wp.norm_xx_hat >= 1.0:
            raise AssumptionError(
                f"step sizes violate sup alpha * ||X^t M2 X|| < 1 "
                f"(got {sup * self.wp.norm_xx_hat:.6g})"
            )
        object.__setattr__(self, "residual", self.wp.residual.copy())

    @property
    def norm_sigma_d(self) -> float:
        return float(np.linalg.norm(self.sigma_d, 2)) if self.sigma_d.size else 0.0

    @property
    def step_limit(self) -> float:
        return second_moment_step_limit(self.wp, self.sigma_d)

    def constant_alpha(self) -> float:
        if not isinstance(self.schedule, Constant):
            raise AssumptionError("this operation requires a constant step-size schedule")
        return self.schedule.alpha

    def require_step_limit(self) -> None:
        if schedule_sup(self.schedule) >= self.step_limit:
            raise AssumptionError(
                f"step sizes violate sup alpha < sigma / (sigma^2 + ||X||^4 ||Sigma_D||) "
                f"= {self.step_limit:.6g} (sup alpha = {schedule_sup(self.schedule):.6g})"
            )


@dataclass(frozen=True)
class MomentState:
    """Exact moments of w_k - w_hat at iteration k (k = 1 is the start)."""

    k: int
    m: Array
    a: Array


def first_moment_step(m: Array, ctx: MomentContext, k: int) -> Array:
    """m_{k+1} = (I - alpha_k X^t M2 X) m_k."""
    alpha = schedule_value(ctx.schedule, k)
    return m - alpha * (ctx.wp.xx_hat @ m)


def s_lin_apply(a: Array, ctx: MomentContext, alpha: float) -> Array:
    """Linear part of the second-moment map:
    (I - alpha G) A (I - alpha G) + alpha^2 X^t (Sigma_D (.) X A X^t) X
    with G the weighted Gram matrix."""
    x = ctx.wp.x
    b = a - alpha * (ctx.wp.xx_hat @ a)
    b = b - alpha * (b @ ctx.wp.xx_hat)
    mid = ctx.sigma_d * (x @ a @ x.T)
    out = b + alpha**2 * (x.T @ mid @ x)
    return 0.5 * (out + out.T)


def s_int(ctx: MomentContext, alpha: float) -> Array:
    """Intercept of the affine map: alpha^2 X^t (Sigma_D (.) r r^t) X with r the residual."""
    x, r = ctx.wp.x, ctx.residual
    out = alpha**2 * (x.T @ (ctx.sigma_d * np.outer(r, r)) @ x)
    return 0.5 * (out + out.T)


def apply_S(a: Array, ctx: MomentContext, k: int) -> Array:
    """Full affine second-moment map S_{alpha_k} applied to a symmetric matrix."""
    a = np.asarray(a, dtype=float)
    if not np.allclose(a, a.T, atol=1e-8):
        raise ValueError("apply_S expects a symmetric matrix")
    alpha = schedule_value(ctx.schedule, k)
    return s_lin_apply(a, ctx, alpha) + s_int(ctx, alpha)


def remainder_rho(m: Array, ctx: MomentContext, k: int) -> Array:
    """Exact remainder of the second-moment recursion:
    -alpha_k^2 X^t (Sigma_D (.) (X m r^t + r m^t X^t)) X.

    m must be the exact first moment at step k; propagate() threads it.
    """
    alpha = schedule_value(ctx.schedule, k)
    x, r = ctx.wp.x, ctx.residual
    xm = x @ m
    cross = ctx.sigma_d * (np.outer(xm, r) + np.outer(r, xm))
    out = -(alpha**2) * (x.T @ cross @ x)
    return 0.5 * (out + out.T)


def propagate(ctx: MomentContext, m1: Array, steps: int) -> list[MomentState]:
    """Exact joint propagation of (m_k, A_k) for k = 1, ..., steps + 1,
    starting from the deterministic initial error m1 (so A_1 = m1 m1^t)."""
    m1 = np.asarray(m1, dtype=float)
    p_ker = ctx.wp.kernel_projector()
    leak = float(np.linalg.norm(p_ker @ m1))
    if leak > 1e-10 * (1.0 + float(np.linalg.norm(m1))):
        raise AssumptionError(
            f"initial error has a kernel component of norm {leak:.3e}; "
            "start the recursion orthogonal to ker(X)"
        )
    m = m1.copy()
    a = np.outer(m1, m1)
    out = [MomentState(1, m.copy(), a.copy())]
    for k in range(1, steps + 1):
        a = apply_S(a, ctx, k) + remainder_rho(m, ctx, k)
        m = first_moment_step(m, ctx, k)
        out.append(MomentState(k + 1, m.copy(), a.copy()))
    return out


def s_lin_contraction_factor(ctx: MomentContext) -> float:
    """Operator norm bound 1 - alpha sigma_min^+ of the linear part on the
    subspace of symmetric matrices whose kernel contains ker(X)."""
    ctx.require_step_limit()
    alpha = ctx.constant_alpha()
    return 1.0 - alpha * ctx.wp.sigma_min_plus_xx_hat


def stationary_second_moment(ctx: MomentContext, tol: float = 1e-12) -> Array:
    """Limit of A_k for constant steps: the Neumann series
    sum_{l >= 0} (S_lin)^l (S_int), truncated once the geometric tail bound
    drops below tol."""
    ctx.require_step_limit()
    alpha = ctx.constant_alpha()
    sigma = ctx.wp.sigma_min_plus_xx_hat
    term = s_int(ctx, alpha)
    total = np.zeros_like(term)
    tail_factor = 1.0 / (alpha * sigma)
    contraction = 1.0 - alpha * sigma
    first = float(np.linalg.norm(term, 2))
    if first == 0.0:
        return total
    # the term norm shrinks at least geometrically, so this cap is generous
    ratio = tol / (first * tail_factor)
    cap = 16
    if ratio < 1.0:
        cap += int(np.ceil(np.log(max(ratio, 1e-300)) / np.log(contraction)))
    for _ in range(cap):
        total += term
        term = s_lin_apply(term, ctx, alpha)
        if float(np.linalg.norm(term, 2)) * tail_factor <= tol:
            break
    else:
        raise RuntimeError("Neumann series failed to reach the truncation tolerance")
    return 0.5 * (total + total.T)
