"""Ensemble simulation, empirical moment and risk estimation, point-mass
transport distances, coupled contraction estimates, and the exhaustive
enumeration oracle that grounds the exact-moment tests.

Trajectories are vectorized in chunks; every trajectory draws its weights
from its own stream keyed by (seed, trajectory index), so results do not
depend on chunking or execution order. Chunk reductions are compensated
(Kahan) sums merged in trajectory order.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import BudgetError
from .linalg import WeightedProblem
from .moments import MomentContext, MomentState, stationary_second_moment
from .schedules import StepSchedule, schedule_value
from .weighting import (
    WeightingScheme,
    finite_support,
    sample_weight_block,
    weight_stream,
)

Array = np.ndarray

_CHUNK = 512


class _Kahan:
    """Compensated accumulator for arrays (or scalars) of a fixed shape."""

    def __init__(self, shape):
        self.total = np.zeros(shape)
        self._c = np.zeros(shape)

    def add(self, value):
        y = value - self._c
        t = self.total + y
        self._c = (t - self.total) - y
        self.total = t


def _map_chunks(fn, total: int, threads: int = 1):
    """Apply fn to index chunks [start, stop) covering range(total); partial
    results come back in chunk order, so merging them is deterministic no
    matter how many workers ran."""
    chunks = [(s, min(s + _CHUNK, total)) for s in range(0, total, _CHUNK)]
    if threads <= 1 or len(chunks) <= 1:
        return [fn(s, e) for s, e in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn, s, e) for s, e in chunks]
        return [f.result() for f in futures]


@dataclass(frozen=True)
class EnsembleSummary:
    """Per-iteration ensemble averages over n_traj independent trajectories.

    mean_error[k] is the sample mean of w_k - w_hat, second_moment[k] the
    sample mean of its outer product, sq_dist[k] the sample mean of
    ||w_k - w_hat||^2 and se_sq_dist its standard error (sample std / sqrt(n)).
    Rows are k = 1 .. K+1.
    """

    steps: int
    n_traj: int
    iter_index: Array
    mean_error: Array        # (K+1, d)
    second_moment: Array     # (K+1, d, d)
    sq_dist: Array           # (K+1,)
    se_sq_dist: Array        # (K+1,)
    seed_base: int

    @property
    def mean_error_norm(self) -> Array:
        return np.linalg.norm(self.mean_error, axis=1)


@dataclass(frozen=True)
class OracleBudget:
    """Cap on the number of enumerated outcome sequences."""

    support_size: int
    steps: int
    max_outcomes: int = 2**16

    def check(self) -> None:
        need = self.support_size**self.steps
        if need > self.max_outcomes:
            raise BudgetError(
                f"enumeration needs {need} outcome sequences "
                f"(support {self.support_size}, horizon {self.steps}) but the cap "
                f"is {self.max_outcomes}; raise max_outcomes to at least {need}"
            )


def _simulate_chunk(wp, scheme, schedule, w1, steps, seed, traj_ids):
    """Run len(traj_ids) trajectories in lockstep; returns (K+1, chunk, d)."""
    x, y = wp.x, wp.y
    chunk = len(traj_ids)
    blocks = np.empty((chunk, steps, wp.n))
    for j, t in enumerate(traj_ids):
        blocks[j] = sample_weight_block(scheme, weight_stream(seed, t), steps)
    w = np.tile(w1, (chunk, 1))            # (chunk, d)
    out = np.empty((steps + 1, chunk, wp.d))
    out[0] = w
    for k in range(1, steps + 1):
        alpha = schedule_value(schedule, k)
        resid = w @ x.T - y                # (chunk, n)
        w = w - alpha * ((blocks[:, k - 1, :] ** 2 * resid) @ x)
        out[k] = w
    return out


def ensemble_moments(
    wp: WeightedProblem,
    scheme: WeightingScheme,
    schedule: StepSchedule,
    w1: Array | None,
    steps: int,
    n_traj: int,
    seed: int,
    threads: int = 1,
) -> EnsembleSummary:
    """Sample means of w_k - w_hat and of its outer product over n_traj runs.

    With a single trajectory the averages are still defined but the standard
    errors are not; they come back as NaN (the CLI warns in that case).
    """
    if n_traj < 1:
        raise ValueError("an ensemble needs at least 1 trajectory")
    if w1 is None:
        w1 = np.zeros(wp.d)
    w1 = np.asarray(w1, dtype=float)
    d = wp.d
    acc_mean = _Kahan((steps + 1, d))
    acc_outer = _Kahan((steps + 1, d, d))
    acc_sq = _Kahan(steps + 1)
    acc_sq2 = _Kahan(steps + 1)

    def _partial(start, stop):
        iterates = _simulate_chunk(wp, scheme, schedule, w1, steps, seed,
                                   list(range(start, stop)))
        err = iterates - wp.w_hat          # (K+1, chunk, d)
        sq = np.einsum("kci,kci->kc", err, err)
        return (err.sum(axis=1), np.einsum("kci,kcj->kij", err, err),
                sq.sum(axis=1), (sq**2).sum(axis=1))

    for p_mean, p_outer, p_sq, p_sq2 in _map_chunks(_partial, n_traj, threads):
        acc_mean.add(p_mean)
        acc_outer.add(p_outer)
        acc_sq.add(p_sq)
        acc_sq2.add(p_sq2)
    mean_err = acc_mean.total / n_traj
    second = acc_outer.total / n_traj
    second = 0.5 * (second + np.transpose(second, (0, 2, 1)))
    sq_mean = acc_sq.total / n_traj
    if n_traj > 1:
        var = np.maximum(acc_sq2.total / n_traj - sq_mean**2, 0.0) * n_traj / (n_traj - 1)
        se = np.sqrt(var / n_traj)
    else:
        se = np.full(steps + 1, np.nan)
    return EnsembleSummary(
        steps=steps,
        n_traj=n_traj,
        iter_index=np.arange(1, steps + 2),
        mean_error=mean_err,
        second_moment=second,
        sq_dist=sq_mean,
        se_sq_dist=se,
        seed_base=seed,
    )


def w2_to_point_mass(samples: Array, center: Array) -> float:
    """Exact 2-Wasserstein distance from the empirical measure of `samples`
    to a point mass: the root of the mean squared distance (the coupling to a
    point mass is forced)."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[None, :]
    if samples.shape[0] == 0:
        raise ValueError("need at least one sample")
    diff = samples - np.asarray(center, dtype=float)
    return float(np.sqrt(np.mean(np.einsum("ij,ij->i", diff, diff))))


@dataclass(frozen=True)
class CoupledSummary:
    """Empirical q-th moment of the coupled difference per iteration."""

    iter_index: Array
    moment_q_root: Array      # (E ||u_k - v_k||^q)^{1/q}
    se_root: Array            # delta-method standard error of the root
    q: float
    n_pairs: int


def gmc_contraction_estimate(
    wp: WeightedProblem,
    scheme: WeightingScheme,
    alpha: float,
    u1: Array,
    v1: Array,
    steps: int,
    q: float,
    n_pairs: int,
    seed: int,
    threads: int = 1,
) -> CoupledSummary:
    """Coupled-pair contraction: each pair shares one weight sequence and the
    per-k empirical (E ||u_k - v_k||^q)^{1/q} is returned with standard errors."""
    if n_pairs < 2:
        raise ValueError("need at least 2 coupled pairs")
    u1 = np.asarray(u1, dtype=float)
    v1 = np.asarray(v1, dtype=float)
    x, y = wp.x, wp.y
    acc = _Kahan(steps + 1)
    acc2 = _Kahan(steps + 1)

    def _partial(start, stop):
        ids = list(range(start, stop))
        chunk = len(ids)
        blocks = np.empty((chunk, steps, wp.n))
        for j, t in enumerate(ids):
            blocks[j] = sample_weight_block(scheme, weight_stream(seed, t), steps)
        u = np.tile(u1, (chunk, 1))
        v = np.tile(v1, (chunk, 1))
        powers = np.empty((steps + 1, chunk))
        powers[0] = np.linalg.norm(u - v, axis=1) ** q
        for k in range(1, steps + 1):
            d2 = blocks[:, k - 1, :] ** 2
            u = u - alpha * ((d2 * (u @ x.T - y)) @ x)
            v = v - alpha * ((d2 * (v @ x.T - y)) @ x)
            powers[k] = np.linalg.norm(u - v, axis=1) ** q
        return powers.sum(axis=1), (powers**2).sum(axis=1)

    for p1, p2 in _map_chunks(_partial, n_pairs, threads):
        acc.add(p1)
        acc2.add(p2)
    mean_q = acc.total / n_pairs
    var = np.maximum(acc2.total / n_pairs - mean_q**2, 0.0) * n_pairs / (n_pairs - 1)
    se_mean = np.sqrt(var / n_pairs)
    root = mean_q ** (1.0 / q)
    # delta method: d/dm m^{1/q} = m^{1/q - 1} / q
    with np.errstate(divide="ignore", invalid="ignore"):
        se_root = np.where(mean_q > 0, se_mean * root / (q * np.maximum(mean_q, 1e-300)), 0.0)
    return CoupledSummary(
        iter_index=np.arange(1, steps + 2),
        moment_q_root=root,
        se_root=se_root,
        q=q,
        n_pairs=n_pairs,
    )


def enumeration_oracle(
    wp: WeightedProblem,
    scheme: WeightingScheme,
    schedule: StepSchedule,
    w1: Array,
    budget: OracleBudget | None = None,
    max_outcomes: int = 2**16,
) -> list[MomentState]:
    """Exact moments by brute force: walk every weight sequence of the
    finite-support scheme with its product probability and accumulate
    probability-weighted sums of w_k - w_hat and its outer product.

    This never touches the affine-operator recursion, so agreement with
    moments.propagate is a genuine two-route check.
    """
    support = finite_support(scheme)
    if support is None:
        raise ValueError("enumeration needs a finitely supported weighting scheme")
    if budget is None:
        raise ValueError("an OracleBudget (support_size, steps) is required")
    if budget.support_size != len(support):
        raise ValueError(
            f"budget declares support {budget.support_size} but the scheme has {len(support)}"
        )
    budget.check()
    steps = budget.steps

    w1 = np.asarray(w1, dtype=float)
    x, y = wp.x, wp.y
    d = wp.d
    # Level-synchronous sweep: all outcome prefixes of length k live in one
    # array, so each level is a handful of small gemms; accumulation stays
    # compensated and is merged in a fixed outcome order.
    ws = w1[None, :].copy()
    probs = np.array([1.0])
    states: list[MomentState] = []
    for k in range(1, steps + 2):
        err = ws - wp.w_hat
        m_acc = _Kahan(d)
        a_acc = _Kahan((d, d))
        for i in range(err.shape[0]):
            m_acc.add(probs[i] * err[i])
            a_acc.add(probs[i] * np.outer(err[i], err[i]))
        a = a_acc.total
        states.append(MomentState(k, m_acc.total, 0.5 * (a + a.T)))
        if k == steps + 1:
            break
        alpha = schedule_value(schedule, k)
        new_ws = []
        new_probs = []
        for diag, p in support:
            d2 = diag**2
            stepped = ws - alpha * ((d2 * (ws @ x.T - y)) @ x)
            new_ws.append(stepped)
            new_probs.append(probs * p)
        ws = np.concatenate(new_ws, axis=0)
        probs = np.concatenate(new_probs)
    return states


def burn_in_horizon(ctx: MomentContext, w1: Array, rel_target: float = 1e-6) -> int:
    """Smallest horizon at which the constant-step deviation envelope drops
    below rel_target * (trace of the stationary moment + d)."""
    from .bounds import second_moment_envelope, var_constants

    limit = stationary_second_moment(ctx)
    target = rel_target * float(np.trace(limit) + ctx.wp.d)
    c2 = var_constants(ctx, w1)["c2"]
    k = 1
    while second_moment_envelope(ctx, c2, k) > target:
        k += 1
        if k > 10_000_000:
            raise RuntimeError("burn-in horizon did not converge")
    return k


def _risk_chunk(x, clean, root, scheme, alpha, w1, w_star, steps, seed, start, stop,
                record_path: bool):
    """Replicates [start, stop): fresh noise, fresh weights, `steps` iterations.
    Returns per-k (or final-k) sums of ||w_k - w*||^2 and of its square."""
    ids = list(range(start, stop))
    chunk = len(ids)
    n = x.shape[0]
    ys = np.empty((chunk, n))
    blocks = np.empty((chunk, steps, n))
    for j, rep in enumerate(ids):
        rng = weight_stream(seed, rep)
        ys[j] = clean + root @ rng.standard_normal(n)
        blocks[j] = sample_weight_block(scheme, rng, steps)
    w = np.tile(w1, (chunk, 1))
    rows = steps + 1 if record_path else 1
    sums = np.zeros(rows)
    sums2 = np.zeros(rows)

    def _record(row, w_now):
        err = w_now - w_star
        sq = np.einsum("ci,ci->c", err, err)
        sums[row] = sq.sum()
        sums2[row] = (sq**2).sum()

    if record_path:
        _record(0, w)
    for k in range(steps):
        resid = w @ x.T - ys
        w = w - alpha * ((blocks[:, k, :] ** 2 * resid) @ x)
        if record_path:
            _record(k + 1, w)
    if not record_path:
        _record(0, w)
    return sums, sums2


def _noise_root(sigma_eps: Array) -> Array:
    evals, evecs = np.linalg.eigh(0.5 * (sigma_eps + sigma_eps.T))
    return evecs * np.sqrt(np.maximum(evals, 0.0))


def risk_limit_estimate(
    wp_builder,
    scheme: WeightingScheme,
    alpha: float,
    w_star: Array,
    sigma_eps: Array,
    k_burn: int,
    n_rep: int,
    seed: int,
    w1: Array | None = None,
    threads: int = 1,
) -> tuple[float, float]:
    """Monte Carlo estimate of the long-run risk lim_k E ||w* - w_k||^2.

    Each replicate draws fresh label noise, rebuilds the weighted problem via
    wp_builder(y), runs k_burn weighted steps with a fresh weight sequence,
    and records the final squared distance to w*. Returns (mean, standard error).
    """
    if n_rep < 2:
        raise ValueError("need at least 2 replicates")
    w_star = np.asarray(w_star, dtype=float)
    sigma_eps = np.asarray(sigma_eps, dtype=float)
    root = _noise_root(sigma_eps)
    n = sigma_eps.shape[0]
    x = wp_builder(np.zeros(n)).x
    clean = x @ w_star
    if w1 is None:
        w1 = np.zeros(x.shape[1])
    w1 = np.asarray(w1, dtype=float)
    sq_acc = _Kahan(1)
    sq2_acc = _Kahan(1)
    partials = _map_chunks(
        lambda s, e: _risk_chunk(x, clean, root, scheme, alpha, w1, w_star,
                                 k_burn, seed, s, e, record_path=False),
        n_rep, threads,
    )
    for p1, p2 in partials:
        sq_acc.add(p1)
        sq2_acc.add(p2)
    mean = float(sq_acc.total[0]) / n_rep
    var = max(float(sq2_acc.total[0]) / n_rep - mean**2, 0.0) * n_rep / (n_rep - 1)
    return mean, float(np.sqrt(var / n_rep))


def risk_curve(
    wp_builder,
    scheme: WeightingScheme,
    alpha: float,
    w_star: Array,
    sigma_eps: Array,
    steps: int,
    n_rep: int,
    seed: int,
    w1: Array | None = None,
    threads: int = 1,
) -> tuple[Array, Array]:
    """Per-iteration E ||w* - w_k||^2 (and standard errors) over replicates
    that redraw both the label noise and the weight sequences; rows k = 1..K+1."""
    if n_rep < 2:
        raise ValueError("need at least 2 replicates")
    w_star = np.asarray(w_star, dtype=float)
    sigma_eps = np.asarray(sigma_eps, dtype=float)
    root = _noise_root(sigma_eps)
    n = sigma_eps.shape[0]
    x = wp_builder(np.zeros(n)).x
    clean = x @ w_star
    if w1 is None:
        w1 = np.zeros(x.shape[1])
    w1 = np.asarray(w1, dtype=float)
    acc = _Kahan(steps + 1)
    acc2 = _Kahan(steps + 1)
    partials = _map_chunks(
        lambda s, e: _risk_chunk(x, clean, root, scheme, alpha, w1, w_star,
                                 steps, seed, s, e, record_path=True),
        n_rep, threads,
    )
    for p1, p2 in partials:
        acc.add(p1)
        acc2.add(p2)
    mean = acc.total / n_rep
    var = np.maximum(acc2.total / n_rep - mean**2, 0.0) * n_rep / (n_rep - 1)
    return mean, np.sqrt(var / n_rep)
