"""Noise schedules and the non-uniform inference timestep plan.

Timesteps are 1-based: ``betas[t - 1]`` is the noise level of step ``t`` and
``alpha_bar(0) == 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ScheduleError(ValueError):
    """Invalid schedule or plan parameters."""


class PlanDegenerateError(ScheduleError):
    pass


@dataclass(frozen=True)
class NoiseSchedule:
    T: int
    betas: np.ndarray
    alphas: np.ndarray = field(init=False, repr=False)
    alpha_bars: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        if betas.shape != (self.T,):
            raise ScheduleError(f"expected {self.T} betas, got shape {betas.shape}")
        if np.any(betas <= 0) or np.any(betas >= 1):
            raise ScheduleError("betas must lie in (0, 1)")
        betas = betas.copy()
        betas.flags.writeable = False
        alphas = 1.0 - betas
        alphas.flags.writeable = False
        alpha_bars = np.cumprod(alphas)
        alpha_bars.flags.writeable = False
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "alpha_bars", alpha_bars)

    def alpha_bar(self, t: int) -> float:
        """Cumulative signal retention at step ``t`` (``t = 0`` gives 1)."""
        t = int(t)
        if t < 0 or t > self.T:
            raise ScheduleError(f"timestep {t} outside [0, {self.T}]")
        return 1.0 if t == 0 else float(self.alpha_bars[t - 1])

    def beta(self, t: int) -> float:
        if t < 1 or t > self.T:
            raise ScheduleError(f"timestep {t} outside [1, {self.T}]")
        return float(self.betas[t - 1])

    def to_dict(self) -> dict:
        return {"T": self.T, "betas": [float(b) for b in self.betas]}

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSchedule":
        return cls(T=int(d["T"]), betas=np.asarray(d["betas"], dtype=np.float64))


def default_beta_range(T: int) -> tuple[float, float]:
    """Linear-schedule endpoints rescaled from the 1000-step convention."""
    scale = 1000.0 / T
    lo = min(max(1e-4 * scale, 1e-8), 0.999)
    hi = min(max(0.02 * scale, lo), 0.999)
    return lo, hi


def build_linear_schedule(T: int, beta_start: float | None = None,
                          beta_end: float | None = None) -> NoiseSchedule:
    if int(T) != T or T < 2:
        raise ScheduleError(f"T must be an integer >= 2, got {T}")
    T = int(T)
    if beta_start is None or beta_end is None:
        lo, hi = default_beta_range(T)
        beta_start = lo if beta_start is None else beta_start
        beta_end = hi if beta_end is None else beta_end
    if not (0 < beta_start <= beta_end < 1):
        raise ScheduleError(
            f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    return NoiseSchedule(T=T, betas=np.linspace(beta_start, beta_end, T))


@dataclass(frozen=True)
class TimestepPlan:
    """Ordered denoiser evaluation timesteps: one jump from T, then a
    uniform descent that stops (truncates) at ``t_min``."""

    t_start: int
    t_max: int
    t_min: int
    steps: tuple[int, ...]

    def __post_init__(self):
        s = self.steps
        if len(s) < 2:
            raise PlanDegenerateError("plan needs at least two steps")
        if s[0] != self.t_start or s[1] != self.t_max or s[-1] != self.t_min:
            raise ScheduleError(f"inconsistent plan endpoints: {s}")
        if any(a <= b for a, b in zip(s, s[1:])):
            raise ScheduleError(f"plan steps must be strictly decreasing: {s}")
        if not (1 <= self.t_min < self.t_max < self.t_start):
            raise ScheduleError(
                f"need 1 <= t_min < t_max < T, got {self.t_min}, {self.t_max}, {self.t_start}")

    @property
    def total_evals(self) -> int:
        return len(self.steps)

    def to_dict(self) -> dict:
        return {"t_start": self.t_start, "t_max": self.t_max,
                "t_min": self.t_min, "steps": list(self.steps)}

    @classmethod
    def from_dict(cls, d: dict) -> "TimestepPlan":
        return cls(int(d["t_start"]), int(d["t_max"]), int(d["t_min"]),
                   tuple(int(v) for v in d["steps"]))


def round_half_up(x: float) -> int:
    # the 1e-9 nudge absorbs representation error such as 2/3 * 45 = 30.000000000000004
    return int(math.floor(x + 0.5 + 1e-9))


def _dedup_decreasing(values) -> list[int]:
    out: list[int] = []
    for v in values:
        if not out or v < out[-1]:
            out.append(v)
    return out


def build_nonuniform_plan(schedule: NoiseSchedule, t_max_frac: float,
                          t_min_frac: float, total_evals: int) -> TimestepPlan:
    if not (0 < t_min_frac < t_max_frac < 1):
        raise ScheduleError(
            f"need 0 < t_min_frac < t_max_frac < 1, got {t_min_frac}, {t_max_frac}")
    if total_evals < 3:
        raise ScheduleError("total_evals must be >= 3")
    T = schedule.T
    t_max = round_half_up(t_max_frac * T)
    t_min = max(round_half_up(t_min_frac * T), 1)
    if not (1 <= t_min < t_max < T):
        raise PlanDegenerateError(
            f"fractions give t_max={t_max}, t_min={t_min} for T={T}")
    descent = np.linspace(t_max, t_min, total_evals - 1)
    steps = _dedup_decreasing([T] + [round_half_up(v) for v in descent])
    if len(steps) < 3:
        raise PlanDegenerateError(f"plan collapsed to {steps}")
    return TimestepPlan(T, t_max, t_min, tuple(steps))


def build_uniform_plan(schedule: NoiseSchedule, total_evals: int,
                       t_end: int = 1) -> TimestepPlan:
    """Evenly spaced full chain from T down to ``t_end`` (the baseline sampler)."""
    if total_evals < 3:
        raise ScheduleError("total_evals must be >= 3")
    T = schedule.T
    steps = _dedup_decreasing(
        round_half_up(v) for v in np.linspace(T, t_end, total_evals))
    if len(steps) < 3:
        raise PlanDegenerateError(f"plan collapsed to {steps}")
    return TimestepPlan(T, steps[1], steps[-1], tuple(steps))
