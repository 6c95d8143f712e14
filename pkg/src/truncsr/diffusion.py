"""Forward noising, clean-sample estimation and the truncated sampler."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonFiniteError, ShapeMismatchError, TimestepRangeError
from .schedule import NoiseSchedule, TimestepPlan

Denoiser = Callable[[np.ndarray, int, np.ndarray], np.ndarray]


@dataclass
class LatentState:
    values: np.ndarray
    t: int

    @property
    def shape(self):
        return self.values.shape


@dataclass
class EstimatedClean:
    values: np.ndarray
    source_t: int


def _check_t(t, schedule: NoiseSchedule, lo: int = 1) -> int:
    if int(t) != t or not (lo <= t <= schedule.T):
        raise TimestepRangeError(f"timestep {t} outside [{lo}, {schedule.T}]")
    return int(t)


def _check_same_shape(a: np.ndarray, b: np.ndarray, what: str):
    if np.shape(a) != np.shape(b):
        raise ShapeMismatchError(f"{what}: {np.shape(a)} vs {np.shape(b)}")


def q_sample(x0: np.ndarray, t: int, eps: np.ndarray,
             schedule: NoiseSchedule) -> np.ndarray:
    """Draw x_t from q(x_t | x_0) given the standard-normal noise ``eps``."""
    t = _check_t(t, schedule)
    _check_same_shape(x0, eps, "x0/eps")
    ab = schedule.alpha_bar(t)
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def estimate_x0(x_t: np.ndarray, t: int, eps_hat: np.ndarray,
                schedule: NoiseSchedule) -> np.ndarray:
    t = _check_t(t, schedule)
    _check_same_shape(x_t, eps_hat, "x_t/eps_hat")
    ab = schedule.alpha_bar(t)
    return (x_t - np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(ab)


def posterior_coefficients(schedule: NoiseSchedule, t: int, s: int | None = None):
    """Coefficients of q(x_s | x_t, x_0) for s < t.

    Returns ``(coef_x0, coef_xt, variance)``. With ``s = t - 1`` these are the
    single-step DDPM posterior; for a skip the per-step alpha/beta are
    replaced by their span equivalents ``abar_t / abar_s`` and
    ``1 - abar_t / abar_s``.
    """
    t = _check_t(t, schedule)
    s = t - 1 if s is None else _check_t(s, schedule, lo=0)
    if s >= t:
        raise TimestepRangeError(f"posterior target {s} must precede {t}")
    ab_t = schedule.alpha_bar(t)
    ab_s = schedule.alpha_bar(s)
    if s == t - 1:
        alpha, beta = schedule.alphas[t - 1], schedule.betas[t - 1]
    else:
        alpha = ab_t / ab_s
        beta = 1.0 - alpha
    coef_x0 = np.sqrt(ab_s) * beta / (1.0 - ab_t)
    coef_xt = np.sqrt(alpha) * (1.0 - ab_s) / (1.0 - ab_t)
    variance = (1.0 - ab_s) / (1.0 - ab_t) * beta
    return float(coef_x0), float(coef_xt), float(variance)


def posterior_step(x_t: np.ndarray, t: int, x0_hat: np.ndarray,
                   schedule: NoiseSchedule, noise: np.ndarray | None,
                   s: int | None = None) -> np.ndarray:
    """One reverse transition x_t -> x_s with s = t - 1 unless given."""
    _check_same_shape(x_t, x0_hat, "x_t/x0_hat")
    c0, ct, var = posterior_coefficients(schedule, t, s)
    mean = c0 * x0_hat + ct * x_t
    if var == 0.0 or noise is None:
        return mean
    _check_same_shape(x_t, noise, "x_t/noise")
    return mean + np.sqrt(var) * noise


def sample_truncated(denoiser: Denoiser, condition: np.ndarray, plan: TimestepPlan,
                     schedule: NoiseSchedule, rng: np.random.Generator,
                     x_shape: tuple | None = None, transition: str = "renoise",
                     trace: list | None = None) -> EstimatedClean:
    """Run the plan from pure noise and return the clean estimate at its last step.

    ``transition="renoise"`` moves between plan levels by re-noising the
    current clean estimate with fresh noise; ``"posterior"`` uses the
    (generalized) DDPM posterior. ``trace`` collects every evaluated state.
    """
    if plan.t_start != schedule.T:
        raise TimestepRangeError(f"plan starts at {plan.t_start}, schedule T={schedule.T}")
    if transition not in ("renoise", "posterior"):
        raise ValueError(f"unknown transition {transition!r}")
    shape = condition.shape if x_shape is None else tuple(x_shape)
    x = rng.standard_normal(shape)
    steps = plan.steps
    for i, t in enumerate(steps):
        if trace is not None:
            trace.append(LatentState(x.copy(), t))
        eps_hat = denoiser(x, t, condition)
        x0_hat = estimate_x0(x, t, eps_hat, schedule)
        if not np.all(np.isfinite(x0_hat)):
            raise NonFiniteError(f"non-finite clean estimate at t={t}")
        if i == len(steps) - 1:
            return EstimatedClean(x0_hat, t)
        s = steps[i + 1]
        if transition == "renoise":
            x = q_sample(x0_hat, s, rng.standard_normal(shape), schedule)
        else:
            x = posterior_step(x, t, x0_hat, schedule, rng.standard_normal(shape), s=s)
        if not np.all(np.isfinite(x)):
            raise NonFiniteError(f"non-finite state at t={s}")
    raise AssertionError("unreachable")
