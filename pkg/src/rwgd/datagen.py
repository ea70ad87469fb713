"""Synthetic dataset generators for the experiment harness.

Both generators rescale a random subset of rows so the weighting rules that
key on row norms (exp(+/-||X_i||)) have something to react to. Which rows got
rescaled is recorded so noise levels can be assigned by group.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import Dataset

Array = np.ndarray


@dataclass(frozen=True)
class GeneratedData:
    dataset: Dataset
    rescaled_rows: Array      # indices of the rows that were blown up


def _design_matrix(n, d, rescale_fraction, rescale_factor, entry_scale, rng):
    x = rng.standard_normal((n, d)) * entry_scale
    n_big = int(round(rescale_fraction * n))
    big = rng.choice(n, size=n_big, replace=False) if n_big > 0 else np.array([], dtype=int)
    x[big] *= rescale_factor
    return x, np.sort(big)


def gaussian_rescaled(
    n: int,
    d: int,
    rescale_fraction: float,
    rescale_factor: float,
    seed: int,
    entry_scale: float = 1.0,
) -> GeneratedData:
    """Gaussian design with a rescaled row subset and noiseless labels
    Y = X w0, so the weighted problem is realizable for every weighting."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be at least 1")
    if not 0.0 <= rescale_fraction <= 1.0:
        raise ValueError("rescale_fraction must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    x, big = _design_matrix(n, d, rescale_fraction, rescale_factor, entry_scale, rng)
    w0 = rng.standard_normal(d) / np.sqrt(d)
    return GeneratedData(Dataset(x, x @ w0, w_star=w0), big)


def heteroscedastic(
    n: int,
    d: int,
    noise_map,
    w_star,
    seed: int,
    rescale_fraction: float = 0.0,
    rescale_factor: float = 1.0,
    entry_scale: float = 1.0,
) -> GeneratedData:
    """Gaussian design with per-row noise levels and labels Y = X w* + eps.

    noise_map is either a length-n list of standard deviations or a
    {"large": s_big, "small": s_rest} rule keyed on the rescaled-row group.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be at least 1")
    w_star = np.asarray(w_star, dtype=float)
    if w_star.shape != (d,):
        raise ValueError(f"w_star must have length d = {d}")
    rng = np.random.default_rng(seed)
    x, big = _design_matrix(n, d, rescale_fraction, rescale_factor, entry_scale, rng)
    if isinstance(noise_map, dict):
        extra = set(noise_map) - {"large", "small"}
        if extra:
            raise ValueError(f"unknown noise_map keys: {sorted(extra)}")
        std = np.full(n, float(noise_map["small"]))
        std[big] = float(noise_map["large"])
    else:
        std = np.asarray(noise_map, dtype=float)
        if std.shape != (n,):
            raise ValueError(f"noise_map must list n = {n} standard deviations")
    if np.any(std < 0):
        raise ValueError("noise standard deviations must be non-negative")
    eps = std * rng.standard_normal(n)
    y = x @ w_star + eps
    return GeneratedData(Dataset(x, y, w_star=w_star, sigma_eps=np.diag(std**2)), big)
