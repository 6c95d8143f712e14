"""Patchwise super-resolution pipeline and the multi-run stability harness.

Images are cut into non-overlapping ``patch x patch`` tiles (1-D signals into
``patch``-long segments); each tile is one row for the codec and denoiser.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SignalPair, upsample_condition
from .diffusion import sample_truncated
from .metrics import MetricMatrix, RunStack, band_energy, g_std, l_std, psnr, ssim
from .schedule import NoiseSchedule, TimestepPlan

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def run_seed(root: int, run: int, image: int = 0) -> int:
    """Seed of run ``run`` on image ``image``:
    ``splitmix64(splitmix64(root ^ run) ^ image)``."""
    return splitmix64(splitmix64((root & MASK64) ^ run) ^ image)


class StackedRNG:
    """Generator facade drawing each consecutive block of rows from its own
    child generator, so a run's noise does not depend on what it is batched with."""

    def __init__(self, generators: list[np.random.Generator], rows_per_block: int):
        self.generators = generators
        self.rows = rows_per_block

    def standard_normal(self, shape):
        shape = tuple(shape)
        if shape[0] != self.rows * len(self.generators):
            raise ValueError(f"expected {self.rows * len(self.generators)} rows, got {shape[0]}")
        block = (self.rows,) + shape[1:]
        return np.concatenate([g.standard_normal(block) for g in self.generators], axis=0)


def to_patches(x: np.ndarray, patch: int) -> np.ndarray:
    if x.ndim == 1:
        if x.size % patch:
            raise ValueError(f"length {x.size} not divisible by patch {patch}")
        return x.reshape(-1, patch)
    h, w = x.shape
    if h % patch or w % patch:
        raise ValueError(f"shape {x.shape} not divisible by patch {patch}")
    return (x.reshape(h // patch, patch, w // patch, patch)
            .transpose(0, 2, 1, 3).reshape(-1, patch * patch))


def from_patches(rows: np.ndarray, shape: tuple, patch: int) -> np.ndarray:
    if len(shape) == 1:
        return rows.reshape(shape)
    h, w = shape
    return (rows.reshape(h // patch, w // patch, patch, patch)
            .transpose(0, 2, 1, 3).reshape(h, w))


@dataclass
class SRPipeline:
    """Condition encoding, stage-1 sampling over ``plan`` and decoding.

    ``transition`` selects how the sampler moves between plan levels
    ("renoise" for the truncated plan, "posterior" for the DDPM baseline).
    """

    codec: object
    denoiser: object
    schedule: NoiseSchedule
    plan: TimestepPlan
    scale: int
    patch: int
    transition: str = "renoise"
    clip: bool = True

    def condition(self, lr: np.ndarray) -> np.ndarray:
        return self.codec.encode_latent(to_patches(upsample_condition(lr, self.scale), self.patch))

    def sample_latents(self, cond: np.ndarray, rng) -> np.ndarray:
        return sample_truncated(self.denoiser, cond, self.plan, self.schedule, rng,
                                x_shape=(cond.shape[0], self.codec.latent_dim),
                                transition=self.transition).values

    def decode(self, latents: np.ndarray, shape: tuple) -> np.ndarray:
        out = self.codec.decode_latent(latents)
        per_image = int(np.prod(shape)) // out.shape[1]
        imgs = np.stack([from_patches(chunk, shape, self.patch)
                         for chunk in out.reshape(-1, per_image, out.shape[1])])
        return np.clip(imgs, 0.0, 1.0) if self.clip else imgs

    def restore(self, lr: np.ndarray, seed: int) -> np.ndarray:
        return self.restore_runs(lr, [seed])[0]

    def restore_runs(self, lr: np.ndarray, seeds: list[int]) -> np.ndarray:
        """Restorations of one LR input, one per seed, stacked on axis 0."""
        cond = self.condition(lr)
        rows = cond.shape[0]
        rng = StackedRNG([np.random.default_rng(s) for s in seeds], rows)
        latents = self.sample_latents(np.tile(cond, (len(seeds), 1)), rng)
        hr_shape = tuple(n * self.scale for n in lr.shape)
        return self.decode(latents, hr_shape)


@dataclass
class StabilityReport:
    per_run: list[dict]
    summary: dict
    stacks: list[RunStack]
    matrices: dict[str, MetricMatrix]


def image_metrics(out: np.ndarray, hr: np.ndarray) -> dict:
    row = {"psnr": psnr(out, hr), "band_energy": band_energy(out)}
    if out.ndim == 2 and min(out.shape) >= 11:
        row["ssim"] = ssim(out, hr)
    return row


def evaluate_stability(pipeline: SRPipeline, pairs: list[SignalPair], n_runs: int,
                       root_seed: int, workers: int = 1) -> StabilityReport:
    """Restore every test input ``n_runs`` times and aggregate fidelity and
    stability metrics. STD entries are None when ``n_runs < 2``."""

    def one(j):
        seeds = [run_seed(root_seed, i, j) for i in range(n_runs)]
        return pipeline.restore_runs(pairs[j].lr, seeds)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as pool:
            outputs = list(pool.map(one, range(len(pairs))))
    else:
        outputs = [one(j) for j in range(len(pairs))]

    per_run = []
    names = None
    table: dict[str, list[list[float]]] = {}
    for j, (pair, runs) in enumerate(zip(pairs, outputs)):
        for i, out in enumerate(runs):
            m = image_metrics(out, pair.hr)
            names = names or list(m)
            for k, v in m.items():
                table.setdefault(k, [[] for _ in pairs])[j].append(v)
            per_run.append({"image": j, "run": i, **m})
    stacks = [RunStack(str(j), runs) for j, runs in enumerate(outputs)]
    matrices = {k: MetricMatrix(k, np.array(v), [str(j) for j in range(len(pairs))])
                for k, v in table.items()}
    summary = {}
    for k, mat in matrices.items():
        summary[f"{k}_mean"] = float(mat.values.mean())
        summary[f"{k}_gstd"] = g_std(mat) if n_runs >= 2 else None
    summary["l_std"] = l_std(stacks) if n_runs >= 2 else None
    return StabilityReport(per_run, summary, stacks, matrices)


def montage(lr: np.ndarray, runs: np.ndarray, hr: np.ndarray, scale: int) -> np.ndarray:
    """[LR upsampled | best-PSNR run | worst-PSNR run | ground truth]."""
    scores = [psnr(r, hr) for r in runs]
    best, worst = runs[int(np.argmax(scores))], runs[int(np.argmin(scores))]
    return np.concatenate([upsample_condition(lr, scale), best, worst, hr], axis=1)
