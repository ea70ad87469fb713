"""Weighting distributions for the random diagonal matrix D.

A scheme bundles a sampler for the diagonal of D with whatever is known about
its moments. M2 = E[D^2] is always diagonal here because the coordinates of D
are drawn from per-coordinate laws (or a single categorical pick); Sigma_D is
the covariance matrix of the squared diagonal (D_11^2, ..., D_nn^2).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

Array = np.ndarray


def weight_stream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, *key).

    Streams with distinct keys are statistically independent, so trajectories
    can be simulated in any order (or in parallel) without changing results.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class Identity:
    """Deterministic weighting D = I (plain full-batch gradient descent)."""

    n: int


@dataclass(frozen=True)
class FixedDiagonal:
    """Deterministic weighting with a fixed non-negative diagonal."""

    c: Array

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.ndim != 1 or np.any(c < 0) or not np.all(np.isfinite(c)):
            raise ValueError("FixedDiagonal needs a 1-d array of finite non-negative reals")
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return self.c.shape[0]


@dataclass(frozen=True)
class CategoricalSingle:
    """Single-point SGD: exactly one diagonal entry equals 1, entry i with probability p_i."""

    p: Array

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 1 or np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("probabilities must be finite and non-negative")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"probabilities must sum to 1, got {p.sum()}")
        object.__setattr__(self, "p", p / p.sum())

    @property
    def n(self) -> int:
        return self.p.shape[0]


@dataclass(frozen=True)
class BernoulliIndependent:
    """Independent 0/1 inclusion of every data point, entry i with probability p_i."""

    p: Array

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 1 or np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
            raise ValueError("inclusion probabilities must lie in [0, 1]")
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return self.p.shape[0]


@dataclass(frozen=True)
class ContinuousIID:
    """I.i.d. continuous weights, one per coordinate.

    The caller supplies the sampler together with the first four moments
    (E[W], E[W^2], E[W^3], E[W^4]); they are never inferred. tau is an
    almost-sure bound on |W| when one exists, None for unbounded laws.
    """

    n: int
    sampler: Callable[[np.random.Generator, tuple], Array]
    moments: tuple[float, float, float, float]
    tau: float | None = None

    def __post_init__(self):
        m1, m2, m3, m4 = (float(m) for m in self.moments)
        if not all(np.isfinite([m1, m2, m3, m4])):
            raise ValueError("declared moments must be finite")
        if m2 < m1 * m1 - 1e-12:
            raise ValueError("inconsistent moments: E[W^2] < E[W]^2")
        if m4 < m2 * m2 - 1e-12:
            raise ValueError("inconsistent moments: E[W^4] < E[W^2]^2")
        object.__setattr__(self, "moments", (m1, m2, m3, m4))


WeightingScheme = Union[Identity, FixedDiagonal, CategoricalSingle, BernoulliIndependent, ContinuousIID]


@dataclass(frozen=True)
class WeightingMoments:
    """Diagonal of M2 = E[D^2] and Sigma_D = Cov(D_11^2, ..., D_nn^2)."""

    m2_diag: Array
    sigma_d: Array
    provenance: str               # "analytic" or "estimated"
    sample_count: int | None = None


def sample_weight_block(scheme: WeightingScheme, rng: np.random.Generator, k: int) -> Array:
    """Draw k consecutive diagonals of D as a (k, n) array."""
    if isinstance(scheme, Identity):
        return np.ones((k, scheme.n))
    if isinstance(scheme, FixedDiagonal):
        return np.tile(scheme.c, (k, 1))
    if isinstance(scheme, CategoricalSingle):
        idx = rng.choice(scheme.n, size=k, p=scheme.p)
        out = np.zeros((k, scheme.n))
        out[np.arange(k), idx] = 1.0
        return out
    if isinstance(scheme, BernoulliIndependent):
        return (rng.random((k, scheme.n)) < scheme.p).astype(float)
    if isinstance(scheme, ContinuousIID):
        draw = np.asarray(scheme.sampler(rng, (k, scheme.n)), dtype=float)
        if draw.shape != (k, scheme.n):
            raise ValueError(f"sampler returned shape {draw.shape}, expected {(k, scheme.n)}")
        return draw
    raise TypeError(f"unknown weighting scheme {type(scheme).__name__}")


def sample_weights(scheme: WeightingScheme, rng: np.random.Generator) -> Array:
    """One draw of the diagonal (D_11, ..., D_nn)."""
    return sample_weight_block(scheme, rng, 1)[0]


def analytic_moments(scheme: WeightingScheme) -> WeightingMoments:
    """Closed-form M2 and Sigma_D.

    Binary outcomes give D^2 = D, so the categorical scheme has
    M2_ii = p_i and Sigma_D = diag(p) - p p^t; independent Bernoulli keeps
    only the diagonal p_i (1 - p_i). Deterministic schemes have Sigma_D = 0.
    """
    if isinstance(scheme, Identity):
        return WeightingMoments(np.ones(scheme.n), np.zeros((scheme.n, scheme.n)), "analytic")
    if isinstance(scheme, FixedDiagonal):
        n = scheme.n
        return WeightingMoments(scheme.c**2, np.zeros((n, n)), "analytic")
    if isinstance(scheme, CategoricalSingle):
        p = scheme.p
        return WeightingMoments(p.copy(), np.diag(p) - np.outer(p, p), "analytic")
    if isinstance(scheme, BernoulliIndependent):
        p = scheme.p
        return WeightingMoments(p.copy(), np.diag(p * (1.0 - p)), "analytic")
    if isinstance(scheme, ContinuousIID):
        _, m2, _, m4 = scheme.moments
        n = scheme.n
        return WeightingMoments(np.full(n, m2), (m4 - m2 * m2) * np.eye(n), "analytic")
    raise TypeError(f"unknown weighting scheme {type(scheme).__name__}")


def estimated_moments(scheme: WeightingScheme, samples: int, rng: np.random.Generator) -> WeightingMoments:
    """Monte Carlo fallback / cross-check: sample mean of D^2 and sample covariance of the squares."""
    if samples < 2:
        raise ValueError("need at least 2 samples to estimate a covariance")
    sq = sample_weight_block(scheme, rng, samples) ** 2
    m2 = sq.mean(axis=0)
    sigma = np.cov(sq, rowvar=False, ddof=1)
    sigma = np.atleast_2d(sigma)
    return WeightingMoments(m2, 0.5 * (sigma + sigma.T), "estimated", sample_count=samples)


def cov_of_squares_apply(sigma_d: Array, u: Array) -> Array:
    """Cov(D^2 u) for deterministic u: the element-wise product Sigma_D (.) u u^t."""
    sigma_d = np.asarray(sigma_d, dtype=float)
    u = np.asarray(u, dtype=float)
    if sigma_d.shape != (u.shape[0], u.shape[0]):
        raise ValueError("Sigma_D and u have incompatible shapes")
    out = sigma_d * np.outer(u, u)
    return 0.5 * (out + out.T)


def support_bound(scheme: WeightingScheme) -> float | None:
    """Almost-sure bound tau on ||D||, or None if the support is unbounded."""
    if isinstance(scheme, (Identity,)):
        return 1.0
    if isinstance(scheme, FixedDiagonal):
        return float(np.max(scheme.c)) if scheme.c.size else 0.0
    if isinstance(scheme, (CategoricalSingle, BernoulliIndependent)):
        return 1.0
    if isinstance(scheme, ContinuousIID):
        return scheme.tau
    raise TypeError(f"unknown weighting scheme {type(scheme).__name__}")


def finite_support(scheme: WeightingScheme) -> list[tuple[Array, float]] | None:
    """All (diagonal, probability) outcomes for finitely supported schemes, else None.

    Zero-probability outcomes are dropped. Outcome order is deterministic.
    """
    if isinstance(scheme, Identity):
        return [(np.ones(scheme.n), 1.0)]
    if isinstance(scheme, FixedDiagonal):
        return [(scheme.c.copy(), 1.0)]
    if isinstance(scheme, CategoricalSingle):
        out = []
        for i, pi in enumerate(scheme.p):
            if pi > 0.0:
                e = np.zeros(scheme.n)
                e[i] = 1.0
                out.append((e, float(pi)))
        return out
    if isinstance(scheme, BernoulliIndependent):
        p = scheme.p
        out = [(np.zeros(0), 1.0)]
        for pi in p:
            grown = []
            for vec, prob in out:
                if 1.0 - pi > 0.0:
                    grown.append((np.append(vec, 0.0), prob * (1.0 - pi)))
                if pi > 0.0:
                    grown.append((np.append(vec, 1.0), prob * pi))
            out = grown
        return out
    return None
