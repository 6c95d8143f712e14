"""Truncated non-uniform diffusion super-resolution at desk scale.

Stage 1 restores structure with a short, truncated diffusion chain in a
small autoencoder's latent space; stage 2 finetunes the decoder
adversarially for detail. G-STD and L-STD measure run-to-run stability.
"""

from .config import ExperimentConfig, load_config
from .diffusion import estimate_x0, posterior_step, q_sample, sample_truncated
from .metrics import band_energy, g_std, l_std, psnr, ssim
from .nn import MLP, DenoiserNet
from .schedule import (NoiseSchedule, TimestepPlan, build_linear_schedule, build_nonuniform_plan,
                       build_uniform_plan)

__all__ = [
    "ExperimentConfig", "load_config", "estimate_x0", "posterior_step", "q_sample",
    "sample_truncated", "band_energy", "g_std", "l_std", "psnr", "ssim", "MLP", "DenoiserNet",
    "NoiseSchedule", "TimestepPlan", "build_linear_schedule", "build_nonuniform_plan",
    "build_uniform_plan",
]
__version__ = "0.1.0"
