"""Stage-1 denoiser training with the jump-consistency losses at t = T, and
stage-2 adversarial decoder finetuning on frozen stage-1 outputs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .diffusion import q_sample
from .errors import DivergenceError, FreezeViolationError, NonFiniteError
from .latent import AutoEncoder, Discriminator, adversarial_losses
from .nn import AdamState, DenoiserNet, adam_step, checksum
from .schedule import NoiseSchedule, TimestepPlan

LOSS_COLUMNS = ("step", "l_diff", "l_T", "l_t_max", "total")


@dataclass
class LossBreakdown:
    l_diff: float
    l_T: float
    l_t_max: float
    total: float
    t_drawn: int

    def __post_init__(self):
        if not all(np.isfinite([self.l_diff, self.l_T, self.l_t_max, self.total])):
            raise NonFiniteError(f"non-finite loss at t={self.t_drawn}")


@dataclass
class TrainConfig:
    """Stage-1 settings. ``timesteps="nonuniform"`` draws from {T} and
    [t_min, t_max]; ``"uniform"`` draws from [1, T] (plain DDPM training)."""

    t_max_frac: float = 2 / 3
    t_min_frac: float = 1 / 3
    total_evals: int = 15
    steps: int = 4000
    batch_size: int = 128
    lr: float = 1e-3
    seed: int = 0
    p_T: float | None = None
    nutl: bool = True
    stop_grad: bool = False
    timesteps: str = "nonuniform"
    log_every: int = 50

    def __post_init__(self):
        if self.p_T is not None and not (0.0 <= self.p_T < 1.0):
            raise ValueError("p_T must lie in [0, 1)")
        if self.steps < 1 or self.batch_size < 1:
            raise ValueError("steps and batch_size must be positive")
        if self.timesteps not in ("nonuniform", "uniform"):
            raise ValueError(f"unknown timestep mode {self.timesteps!r}")


def default_p_T(plan: TimestepPlan) -> float:
    return 1.0 / (plan.t_max - plan.t_min + 2)


def sample_training_timestep(plan: TimestepPlan, rng: np.random.Generator,
                             p_T: float | None = None) -> int:
    p = default_p_T(plan) if p_T is None else p_T
    if rng.random() < p:
        return plan.t_start
    return int(rng.integers(plan.t_min, plan.t_max + 1))


def loss_standard(net: DenoiserNet, x0: np.ndarray, condition: np.ndarray, t: int,
                  schedule: NoiseSchedule, rng: np.random.Generator,
                  with_grad: bool = True):
    """Noise-prediction MSE at timestep ``t``; returns ``(breakdown, tape)``."""
    eps = rng.standard_normal(x0.shape)
    x_t = q_sample(x0, t, eps, schedule)
    eps_hat, cache = net.forward(x_t, t, condition, keep_cache=True)
    diff = eps_hat - eps
    l = float(np.mean(diff ** 2))
    losses = LossBreakdown(l, 0.0, 0.0, l, t)
    tape = net.backward(cache, 2.0 * diff / diff.size) if with_grad else None
    return losses, tape


def loss_at_T(net: DenoiserNet, x0: np.ndarray, condition: np.ndarray,
              plan: TimestepPlan, schedule: NoiseSchedule, rng: np.random.Generator,
              stop_grad: bool = False, with_grad: bool = True):
    """l_diff at T plus the clean-estimate losses at T and at t_max.

    The t_max term re-noises the T-step clean estimate with fresh noise and
    evaluates the network a second time; gradients flow back through both
    evaluations unless ``stop_grad`` detaches the re-noised input.
    """
    T, tm = plan.t_start, plan.t_max
    ab_T, ab_m = schedule.alpha_bar(T), schedule.alpha_bar(tm)
    sT, nT = np.sqrt(ab_T), np.sqrt(1.0 - ab_T)
    sm, nm = np.sqrt(ab_m), np.sqrt(1.0 - ab_m)

    eps = rng.standard_normal(x0.shape)
    x_T = q_sample(x0, T, eps, schedule)
    eps_T, cache_T = net.forward(x_T, T, condition, keep_cache=True)
    x0_T = (x_T - nT * eps_T) / sT

    eps_fresh = rng.standard_normal(x0.shape)
    x_m = sm * x0_T + nm * eps_fresh
    eps_m, cache_m = net.forward(x_m, tm, condition, keep_cache=True)
    x0_m = (x_m - nm * eps_m) / sm

    n = x0.size
    l_diff = float(np.mean((eps_T - eps) ** 2))
    l_T = float(np.mean((x0 - x0_T) ** 2))
    l_m = float(np.mean((x0 - x0_m) ** 2))
    losses = LossBreakdown(l_diff, l_T, l_m, l_diff + l_T + l_m, T)
    if not with_grad:
        return losses, None

    g_x0m = 2.0 * (x0_m - x0) / n
    tape_m = net.backward(cache_m, -nm / sm * g_x0m)
    g_x0T = 2.0 * (x0_T - x0) / n
    if not stop_grad:
        g_xm = g_x0m / sm + tape_m.input_grad
        g_x0T = g_x0T + sm * g_xm
    g_epsT = 2.0 * (eps_T - eps) / n - nT / sT * g_x0T
    tape = net.backward(cache_T, g_epsT)
    tape += tape_m
    return losses, tape


@dataclass
class TrainResult:
    net: DenoiserNet
    curve: list[dict] = field(default_factory=list)
    history: list[LossBreakdown] = field(default_factory=list)


def _check_finite_params(params, step):
    for p in params:
        if not np.all(np.isfinite(p)):
            raise DivergenceError(f"parameters became non-finite at step {step}")


def train_stage1(net: DenoiserNet, x0: np.ndarray, condition: np.ndarray,
                 schedule: NoiseSchedule, plan: TimestepPlan,
                 config: TrainConfig) -> TrainResult:
    """Adam training of the denoiser on paired (clean latent, condition) rows.

    ``curve`` holds one mean breakdown per ``log_every`` steps; rows without a
    T-draw report zero for the T-only terms.
    """
    rng = np.random.default_rng(config.seed)
    params = net.params()
    opt = AdamState.for_params(params, config.lr)
    result = TrainResult(net)
    window: list[LossBreakdown] = []
    for step in range(1, config.steps + 1):
        idx = rng.integers(0, len(x0), size=config.batch_size)
        xb, cb = x0[idx], condition[idx]
        if config.timesteps == "uniform":
            t = int(rng.integers(1, schedule.T + 1))
        else:
            t = sample_training_timestep(plan, rng, config.p_T)
        try:
            if t == plan.t_start and config.nutl and config.timesteps == "nonuniform":
                losses, tape = loss_at_T(net, xb, cb, plan, schedule, rng, config.stop_grad)
            else:
                losses, tape = loss_standard(net, xb, cb, t, schedule, rng)
        except NonFiniteError as exc:
            raise DivergenceError(f"loss diverged at step {step}") from exc
        adam_step(params, tape, opt)
        result.history.append(losses)
        window.append(losses)
        if step % config.log_every == 0 or step == config.steps:
            result.curve.append({
                "step": step,
                "l_diff": float(np.mean([w.l_diff for w in window])),
                "l_T": float(np.mean([w.l_T for w in window])),
                "l_t_max": float(np.mean([w.l_t_max for w in window])),
                "total": float(np.mean([w.total for w in window])),
            })
            window = []
            _check_finite_params(params, step)
    return result


@dataclass
class Stage2Config:
    steps: int = 300
    batch_size: int = 128
    lr: float = 1e-4
    disc_lr: float = 1e-4
    l1_weight: float = 1.0
    adv_weight: float = 0.1
    seed: int = 0
    log_every: int = 25


@dataclass
class Stage2Result:
    ae: AutoEncoder
    disc: Discriminator
    curve: list[dict] = field(default_factory=list)
    checksums: dict = field(default_factory=dict)


def frozen_checksums(frozen: dict[str, list[np.ndarray]]) -> dict[str, str]:
    return {name: checksum(params) for name, params in frozen.items()}


def train_stage2(ae: AutoEncoder, disc: Discriminator,
                 stage1: Callable[[np.ndarray, np.random.Generator], np.ndarray],
                 frozen: dict[str, list[np.ndarray]], condition: np.ndarray,
                 target: np.ndarray, config: Stage2Config) -> Stage2Result:
    """Finetune ``ae.decoder`` on frozen stage-1 outputs.

    ``stage1(cond_batch, rng)`` returns diffusion-space clean estimates for a
    batch of conditions; ``target`` holds the matching ground-truth signals.
    ``frozen`` names parameter lists that must be bit-identical on exit.
    """
    frozen = dict(frozen)
    frozen.setdefault("encoder", ae.encoder.params())
    before = frozen_checksums(frozen)
    rng = np.random.default_rng(config.seed)
    dec_params = ae.decoder.params()
    dec_opt = AdamState.for_params(dec_params, config.lr)
    disc_opt = AdamState.for_params(disc.params(), config.disc_lr)
    result = Stage2Result(ae, disc)
    window = []
    for step in range(1, config.steps + 1):
        idx = rng.integers(0, len(condition), size=config.batch_size)
        z = stage1(condition[idx], rng)
        real = target[idx]
        fake, cache = ae.decoder.forward(ae.unstandardize(z), keep_cache=True)
        diff = fake - real
        l1 = float(np.mean(np.abs(diff)))
        grad_fake = config.l1_weight * np.sign(diff) / diff.size
        adv = adversarial_losses(disc, real, fake, with_grads=True)
        if config.adv_weight:
            grad_fake = grad_fake + config.adv_weight * adv.fake_grad
        total = config.l1_weight * l1 + config.adv_weight * adv.gen_loss
        if not np.isfinite(total):
            raise DivergenceError(f"stage-2 loss diverged at step {step}")
        adam_step(dec_params, ae.decoder.backward(cache, grad_fake), dec_opt)
        if config.adv_weight:
            adam_step(disc.params(), adv.disc_tape, disc_opt)
        window.append((l1, adv.gen_loss, adv.disc_loss, float(np.mean(diff ** 2))))
        if step % config.log_every == 0 or step == config.steps:
            w = np.mean(window, axis=0)
            result.curve.append({"step": step, "l1": w[0], "gen": w[1],
                                 "disc": w[2], "mse": w[3]})
            window = []
    after = frozen_checksums(frozen)
    changed = [k for k in before if before[k] != after[k]]
    if changed:
        raise FreezeViolationError(f"frozen parameters changed: {changed}")
    result.checksums = after
    return result


def moving_average(values, window: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    kernel = np.ones(window) / window
    return np.convolve(values, kernel, mode="valid")
