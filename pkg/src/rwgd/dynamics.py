"""Iterate recursions: full-batch descent, randomly weighted descent,
trajectory simulation, and coupled pairs sharing one weight sequence.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AssumptionError
from .linalg import WeightedProblem
from .schedules import StepSchedule, schedule_sup, schedule_value
from .weighting import WeightingScheme, sample_weight_block, weight_stream

Array = np.ndarray

# Above this horizon full iterate storage would dominate memory; keep a
# logarithmic checkpoint grid plus the final iterate instead.
FULL_STORAGE_LIMIT = 100_000

ORTH_TOL = 1e-10


def full_batch_step(w: Array, wp: WeightedProblem, alpha: float) -> Array:
    """One step of deterministic gradient descent on ||X w - Y||^2.

    Requires alpha * ||X^t X|| < 1 so that the step contracts on the row space.
    """
    if alpha * wp.norm_xx >= 1.0:
        raise AssumptionError(
            f"step size violates sup alpha * ||X^t X|| < 1 "
            f"(alpha * ||X^t X|| = {alpha * wp.norm_xx:.6g})"
        )
    x, y = wp.x, wp.y
    return w - alpha * (x.T @ (x @ w - y))


def weighted_step(w: Array, x: Array, y: Array, alpha: float, d: Array) -> Array:
    """One randomly weighted step: w - alpha * X^t D^2 (X w - Y) with D = diag(d)."""
    return w - alpha * (x.T @ (d * d * (x @ w - y)))


def check_start_orthogonal(wp: WeightedProblem, w1: Array, override: bool = False) -> None:
    """Enforce w1 perpendicular to ker(X) unless explicitly overridden."""
    if override:
        return
    p_ker = wp.kernel_projector()
    leak = float(np.linalg.norm(p_ker @ w1))
    if leak > ORTH_TOL * (1.0 + float(np.linalg.norm(w1))):
        raise AssumptionError(
            f"initial guess has a kernel component of norm {leak:.3e}; "
            "it must lie in the orthogonal complement of ker(X)"
        )


def _check_step_sizes(wp: WeightedProblem, schedule: StepSchedule) -> None:
    sup = schedule_sup(schedule)
    if sup * wp.norm_xx_hat >= 1.0:
        raise AssumptionError(
            f"step sizes violate sup alpha * ||X^t M2 X|| < 1 "
            f"(sup alpha * ||X^t M2 X|| = {sup * wp.norm_xx_hat:.6g})"
        )


@dataclass(frozen=True)
class TrajectoryRecord:
    """Iterates of one simulated run. iter_index[j] is the k of iterates[j]
    (k = 1 is the initial guess); weights holds the drawn diagonals when the
    caller asked for them."""

    iterates: Array           # (stored, d)
    iter_index: Array         # (stored,) ints
    seed: int
    schedule: StepSchedule
    scheme: WeightingScheme
    weights: Array | None = None

    @property
    def final(self) -> Array:
        return self.iterates[-1]


def _storage_grid(steps: int) -> np.ndarray:
    """Iteration indices to retain: everything, or a log grid plus endpoints."""
    if steps <= FULL_STORAGE_LIMIT:
        return np.arange(1, steps + 2)
    grid = {1, steps + 1}
    k = 1
    while k <= steps:
        grid.add(k + 1)
        k *= 2
    return np.array(sorted(grid))


def run_trajectory(
    wp: WeightedProblem,
    scheme: WeightingScheme,
    schedule: StepSchedule,
    w1: Array | None,
    steps: int,
    seed: int,
    traj_index: int = 0,
    enforce_assumptions: bool = True,
    keep_weights: bool = False,
) -> TrajectoryRecord:
    """Simulate `steps` randomly weighted iterations from w1 (default zero).

    A fresh diagonal is drawn per iteration from the stream keyed by
    (seed, traj_index), so the record is reproducible regardless of how many
    other trajectories ran before this one.
    """
    if w1 is None:
        w1 = np.zeros(wp.d)
    w1 = np.asarray(w1, dtype=float)
    if enforce_assumptions:
        _check_step_sizes(wp, schedule)
        check_start_orthogonal(wp, w1)
    rng = weight_stream(seed, traj_index)
    block = sample_weight_block(scheme, rng, steps) if steps > 0 else np.zeros((0, wp.n))
    grid = _storage_grid(steps)
    stored = np.zeros((grid.size, wp.d))
    pos = 0
    if grid[pos] == 1:
        stored[pos] = w1
        pos += 1
    w = w1
    x, y = wp.x, wp.y
    for k in range(1, steps + 1):
        w = weighted_step(w, x, y, schedule_value(schedule, k), block[k - 1])
        if pos < grid.size and grid[pos] == k + 1:
            stored[pos] = w
            pos += 1
    return TrajectoryRecord(
        iterates=stored,
        iter_index=grid,
        seed=seed,
        schedule=schedule,
        scheme=scheme,
        weights=block if keep_weights else None,
    )


def run_coupled_pair(
    wp: WeightedProblem,
    scheme: WeightingScheme,
    schedule: StepSchedule,
    u1: Array,
    v1: Array,
    steps: int,
    seed: int,
    pair_index: int = 0,
    enforce_assumptions: bool = True,
    keep_weights: bool = False,
) -> tuple[TrajectoryRecord, TrajectoryRecord]:
    """Two trajectories driven by the identical weight sequence.

    Their difference obeys u_{k+1} - v_{k+1} = (I - alpha_k X^t D_k^2 X)(u_k - v_k),
    which is the coupling behind the geometric moment contraction estimates.
    """
    u1 = np.asarray(u1, dtype=float)
    v1 = np.asarray(v1, dtype=float)
    if enforce_assumptions:
        _check_step_sizes(wp, schedule)
        check_start_orthogonal(wp, u1)
        check_start_orthogonal(wp, v1)
    rng = weight_stream(seed, pair_index)
    block = sample_weight_block(scheme, rng, steps) if steps > 0 else np.zeros((0, wp.n))
    grid = _storage_grid(steps)
    x, y = wp.x, wp.y

    def _run(w0: Array) -> Array:
        stored = np.zeros((grid.size, wp.d))
        pos = 0
        if grid[pos] == 1:
            stored[pos] = w0
            pos += 1
        w = w0
        for k in range(1, steps + 1):
            w = weighted_step(w, x, y, schedule_value(schedule, k), block[k - 1])
            if pos < grid.size and grid[pos] == k + 1:
                stored[pos] = w
                pos += 1
        return stored

    kept = block if keep_weights else None
    rec_u = TrajectoryRecord(_run(u1), grid, seed, schedule, scheme, weights=kept)
    rec_v = TrajectoryRecord(_run(v1), grid, seed, schedule, scheme, weights=kept)
    return rec_u, rec_v
