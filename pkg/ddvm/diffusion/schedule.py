"""Noise schedules gamma(t) on continuous time t in [0, 1] and their discretization."""

import math
from dataclasses import dataclass
from typing import List, Union

import numpy as np

from ddvm.errors import ScheduleError

# gamma is squashed into [GAMMA_CLIP, 1 - GAMMA_CLIP]
GAMMA_CLIP = 1e-5

SCHEDULE_KINDS = ("cosine", "linear_beta")

DEPTH_SAMPLING_STEPS = 128
FLOW_SAMPLING_STEPS = 64

TimeLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class DiffusionStep:
    """One refinement step from time t down to s."""

    t: float
    s: float
    gamma_t: float
    gamma_s: float

    def __post_init__(self):
        if not (0.0 <= self.s < self.t <= 1.0):
            raise ScheduleError(f"invalid diffusion step t={self.t} -> s={self.s}; need 0 <= s < t <= 1")

    @property
    def is_final(self) -> bool:
        return self.s == 0.0


@dataclass(frozen=True)
class NoiseSchedule:
    """
    Signal-retention coefficient gamma(t), strictly decreasing in t.

    cosine:      cos^2(pi/2 * (t + s0) / (1 + s0)), s0 = cosine_offset
    linear_beta: exp(-(b0 t + (b1 - b0) t^2 / 2)), the continuous-time DDPM linear-beta schedule

    The raw value r is mapped to GAMMA_CLIP + (1 - 2 GAMMA_CLIP) r, which
    bounds gamma away from 0 and 1 without flattening it.
    """

    kind: str = "cosine"
    steps: int = FLOW_SAMPLING_STEPS
    cosine_offset: float = 0.008
    beta_min: float = 0.1
    beta_max: float = 20.0

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ScheduleError(f"unknown schedule kind '{self.kind}', expected one of {SCHEDULE_KINDS}")
        if self.steps < 1:
            raise ScheduleError(f"schedule needs at least one step, got {self.steps}")
        if self.cosine_offset < 0 or self.beta_min < 0 or self.beta_max <= self.beta_min:
            raise ScheduleError("invalid schedule parameters")

    def _raw(self, t: np.ndarray) -> np.ndarray:
        if self.kind == "cosine":
            s0 = self.cosine_offset
            return np.cos(0.5 * math.pi * (t + s0) / (1.0 + s0)) ** 2
        return np.exp(-(self.beta_min * t + 0.5 * (self.beta_max - self.beta_min) * t * t))

    def gamma(self, t: TimeLike) -> TimeLike:
        arr = np.asarray(t, dtype=np.float64)
        if np.any(arr < 0.0) or np.any(arr > 1.0) or not np.all(np.isfinite(arr)):
            raise ScheduleError("time must lie in [0, 1]")
        out = GAMMA_CLIP + (1.0 - 2.0 * GAMMA_CLIP) * self._raw(arr)
        return float(out) if out.ndim == 0 else out

    def timesteps(self, steps: int = 0, t_start: float = 1.0) -> np.ndarray:
        """Descending grid t_start * i / n for i = n..0, with n = round(t_start * steps)."""
        n_total = steps or self.steps
        if n_total < 1:
            raise ScheduleError(f"sampling needs at least one step, got {n_total}")
        if not (0.0 < t_start <= 1.0):
            raise ScheduleError(f"chain start time must lie in (0, 1], got {t_start}")
        n = max(1, int(round(t_start * n_total)))
        return t_start * (np.arange(n, -1, -1, dtype=np.float64) / n)

    def step(self, t: float, s: float) -> DiffusionStep:
        return DiffusionStep(float(t), float(s), float(self.gamma(t)), float(self.gamma(s)))

    def chain(self, steps: int = 0, t_start: float = 1.0) -> List[DiffusionStep]:
        times = self.timesteps(steps, t_start)
        return [self.step(t, s) for t, s in zip(times[:-1], times[1:])]
