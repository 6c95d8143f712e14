"""Closed-form Gaussian denoiser and loop-based reference implementations.

Nothing here imports the metrics module, so the brute-force STD routines
stay an independent check on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diffusion import estimate_x0, posterior_step
from .errors import InsufficientRunsError, ShapeMismatchError
from .schedule import NoiseSchedule


@dataclass(frozen=True)
class GaussianPrior:
    """Diagonal Gaussian N(mean, var) over x0; scalars broadcast."""

    mean: float | np.ndarray = 0.0
    var: float | np.ndarray = 1.0

    def __post_init__(self):
        if np.any(np.asarray(self.var) <= 0):
            raise ValueError("prior variance must be positive")


def posterior_mean(prior: GaussianPrior, x_t: np.ndarray, t: int,
                   schedule: NoiseSchedule) -> np.ndarray:
    """E[x0 | x_t] under the prior and the forward process."""
    ab = schedule.alpha_bar(t)
    v0 = np.asarray(prior.var)
    return (np.sqrt(ab) * v0 * x_t + (1.0 - ab) * np.asarray(prior.mean)) / (ab * v0 + 1.0 - ab)


def oracle_eps(prior: GaussianPrior, x_t: np.ndarray, t: int,
               schedule: NoiseSchedule) -> np.ndarray:
    """Bayes-optimal noise prediction for the declared prior."""
    ab = schedule.alpha_bar(t)
    return (x_t - np.sqrt(ab) * posterior_mean(prior, x_t, t, schedule)) / np.sqrt(1.0 - ab)


class OracleDenoiser:
    """Denoiser callable backed by ``oracle_eps``; records every timestep it sees."""

    def __init__(self, prior: GaussianPrior, schedule: NoiseSchedule):
        self.prior = prior
        self.schedule = schedule
        self.calls: list[int] = []

    def __call__(self, x_t, t, condition=None):
        self.calls.append(int(t))
        return oracle_eps(self.prior, x_t, t, self.schedule)


@dataclass
class MomentReport:
    n: int
    mean: float
    var: float
    prior_mean: float
    prior_var: float

    def as_row(self) -> dict:
        return {"n": self.n, "mean": self.mean, "var": self.var,
                "prior_mean": self.prior_mean, "prior_var": self.prior_var}


def oracle_full_chain_check(prior: GaussianPrior, schedule: NoiseSchedule,
                            n_samples: int, rng: np.random.Generator,
                            reverse_noise: bool = True) -> MomentReport:
    """Run the uniform reverse chain T -> 0 with oracle clean estimates on
    scalar samples and report output moments."""
    if n_samples < 10_000:
        raise ValueError("n_samples must be at least 1e4")
    x = rng.standard_normal(n_samples)
    for t in range(schedule.T, 0, -1):
        x0_hat = estimate_x0(x, t, oracle_eps(prior, x, t, schedule), schedule)
        noise = rng.standard_normal(n_samples) if reverse_noise else None
        x = posterior_step(x, t, x0_hat, schedule, noise)
    return MomentReport(n_samples, float(x.mean()), float(x.var()),
                        float(np.mean(prior.mean)), float(np.mean(prior.var)))


def brute_force_g_std(values) -> float:
    """Per-row population STD averaged over rows, by explicit loops."""
    rows = [list(map(float, r)) for r in values]
    total = 0.0
    for row in rows:
        n = len(row)
        if n < 2:
            raise InsufficientRunsError("need at least two runs per image")
        mu = 0.0
        for v in row:
            mu += v
        mu /= n
        acc = 0.0
        for v in row:
            acc += (v - mu) ** 2
        total += math.sqrt(acc / n)
    return total / len(rows)


def brute_force_l_std(stacks) -> float:
    """Pixelwise population STD over runs averaged over pixels and images.

    ``stacks`` is a sequence of images, each a sequence of N equally shaped runs.
    """
    total = 0.0
    count = 0
    for runs in stacks:
        runs = [np.asarray(r, dtype=np.float64) for r in runs]
        n = len(runs)
        if n < 2:
            raise InsufficientRunsError("need at least two runs per image")
        shape = runs[0].shape
        if any(r.shape != shape for r in runs):
            raise ShapeMismatchError("runs differ in shape")
        flat = [r.reshape(-1).tolist() for r in runs]
        for k in range(len(flat[0])):
            mu = 0.0
            for i in range(n):
                mu += flat[i][k]
            mu /= n
            acc = 0.0
            for i in range(n):
                acc += (flat[i][k] - mu) ** 2
            total += math.sqrt(acc / n)
            count += 1
    return total / count
