"""Step-size schedules: constant, harmonic (alpha/k), or an explicit sequence."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ScheduleExhaustedError


@dataclass(frozen=True)
class Constant:
    alpha: float

    def __post_init__(self):
        if not (self.alpha > 0 and np.isfinite(self.alpha)):
            raise ValueError("step size must be a positive finite real")


@dataclass(frozen=True)
class Harmonic:
    """alpha_k = alpha / k."""

    alpha: float

    def __post_init__(self):
        if not (self.alpha > 0 and np.isfinite(self.alpha)):
            raise ValueError("step size must be a positive finite real")


@dataclass(frozen=True)
class Explicit:
    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) == 0 or any(not (v > 0 and np.isfinite(v)) for v in vals):
            raise ValueError("explicit schedule needs positive finite step sizes")
        object.__setattr__(self, "values", vals)


StepSchedule = Union[Constant, Harmonic, Explicit]


def schedule_value(s: StepSchedule, k: int) -> float:
    """alpha_k for iteration k >= 1."""
    if k < 1:
        raise ValueError("iterations are counted from 1")
    if isinstance(s, Constant):
        return s.alpha
    if isinstance(s, Harmonic):
        return s.alpha / k
    if isinstance(s, Explicit):
        if k > len(s.values):
            raise ScheduleExhaustedError(
                f"explicit schedule has {len(s.values)} values, iteration {k} requested"
            )
        return s.values[k - 1]
    raise TypeError(f"unknown schedule {type(s).__name__}")


def schedule_prefix(s: StepSchedule, k: int) -> np.ndarray:
    """(alpha_1, ..., alpha_k) as an array; empty for k = 0."""
    return np.array([schedule_value(s, j) for j in range(1, k + 1)])


def schedule_sup(s: StepSchedule) -> float:
    """sup_k alpha_k over the whole (possibly infinite) schedule."""
    if isinstance(s, (Constant, Harmonic)):
        return s.alpha
    return max(s.values)


def schedule_diverges(s: StepSchedule) -> bool:
    """Whether sum_k alpha_k = infinity, decided by variant."""
    return isinstance(s, (Constant, Harmonic))
