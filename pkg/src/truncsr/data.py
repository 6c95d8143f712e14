"""Synthetic HR/LR corpora with a single-pass blur/downsample/noise/quantize
degradation."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

KINDS = ("signals1d", "textures2d", "gaussians")


@dataclass
class DegradationParams:
    blur_sigma: tuple[float, float] = (0.8, 1.6)
    factor: int = 4
    noise_sigma: tuple[float, float] = (0.0, 0.02)
    quant_levels: int | None = None

    def __post_init__(self):
        self.blur_sigma = tuple(float(v) for v in self.blur_sigma)
        self.noise_sigma = tuple(float(v) for v in self.noise_sigma)
        lo, hi = self.blur_sigma
        if lo < 0 or hi < lo:
            raise ValueError(f"bad blur sigma range {self.blur_sigma}")
        lo, hi = self.noise_sigma
        if lo < 0 or hi < lo:
            raise ValueError(f"bad noise sigma range {self.noise_sigma}")
        if int(self.factor) != self.factor or self.factor < 1:
            raise ValueError(f"factor must be a positive integer, got {self.factor}")
        self.factor = int(self.factor)
        if self.quant_levels is not None and self.quant_levels < 2:
            raise ValueError("quantization needs at least 2 levels")

    @classmethod
    def identity(cls) -> "DegradationParams":
        return cls(blur_sigma=(0.0, 0.0), factor=1, noise_sigma=(0.0, 0.0))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["blur_sigma"] = list(self.blur_sigma)
        d["noise_sigma"] = list(self.noise_sigma)
        return d


@dataclass
class SignalPair:
    hr: np.ndarray
    lr: np.ndarray
    scale: int
    degradation: dict = field(default_factory=dict)


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    """Normalized Gaussian taps with radius round(3 sigma)."""
    radius = max(int(3.0 * sigma + 0.5), 1)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def blur(x: np.ndarray, sigma: float) -> np.ndarray:
    if sigma <= 0:
        return x.astype(np.float64, copy=True)
    k = gaussian_kernel1d(sigma)
    out = np.asarray(x, np.float64)
    for axis in range(out.ndim):
        out = correlate1d(out, k, axis=axis, mode="reflect")
    return out


def downsample(x: np.ndarray, factor: int) -> np.ndarray:
    """Average pooling over non-overlapping ``factor``-sized blocks."""
    if factor == 1:
        return np.asarray(x, np.float64).copy()
    if any(n % factor for n in x.shape):
        raise ValueError(f"shape {x.shape} not divisible by {factor}")
    if x.ndim == 1:
        return x.reshape(-1, factor).mean(axis=1)
    h, w = x.shape
    return x.reshape(h // factor, factor, w // factor, factor).mean(axis=(1, 3))


def quantize(x: np.ndarray, levels: int) -> np.ndarray:
    return np.round(x * (levels - 1)) / (levels - 1)


def degrade(hr: np.ndarray, params: DegradationParams, rng: np.random.Generator,
            return_info: bool = False):
    """blur -> downsample -> additive noise (clipped) -> optional quantization."""
    sb = rng.uniform(*params.blur_sigma)
    sn = rng.uniform(*params.noise_sigma)
    x = blur(hr, sb)
    x = downsample(x, params.factor)
    if sn > 0:
        x = x + rng.normal(0.0, sn, size=x.shape)
    x = np.clip(x, 0.0, 1.0)
    if params.quant_levels:
        x = quantize(x, params.quant_levels)
    if return_info:
        return x, {"blur_sigma": float(sb), "noise_sigma": float(sn)}
    return x


def upsample_condition(lr: np.ndarray, s: int) -> np.ndarray:
    """Nearest-neighbour upsampling by an integer factor."""
    out = np.asarray(lr, np.float64)
    for axis in range(out.ndim):
        out = np.repeat(out, s, axis=axis)
    return out


def make_texture(size: int, rng: np.random.Generator) -> np.ndarray:
    """Gratings plus Gaussian blobs plus hard edges, clipped to [0, 1]."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    img = np.full((size, size), rng.uniform(0.35, 0.65))
    # one coarse grating plus one or two fine ones the 4x pooling mostly removes
    bands = [(1.5, 6.0)] + [(6.0, 16.0)] * int(rng.integers(1, 3))
    for lo, hi in bands:
        theta = rng.uniform(0, np.pi)
        cycles = rng.uniform(lo, hi)
        amp = rng.uniform(0.06, 0.18)
        proj = xx * np.cos(theta) + yy * np.sin(theta)
        img += amp * np.sin(2 * np.pi * cycles * proj / size + rng.uniform(0, 2 * np.pi))
    for _ in range(rng.integers(1, 4)):
        cy, cx = rng.uniform(0, size, 2)
        s = rng.uniform(0.05, 0.15) * size
        img += rng.uniform(-0.3, 0.3) * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * s * s))
    for _ in range(rng.integers(0, 3)):
        theta = rng.uniform(0, 2 * np.pi)
        offset = rng.uniform(-0.3, 0.3) * size
        d = (xx - size / 2) * np.cos(theta) + (yy - size / 2) * np.sin(theta) - offset
        img += rng.uniform(-0.2, 0.2) * (d > 0)
    return np.clip(img, 0.0, 1.0)


def make_signal1d(length: int, rng: np.random.Generator) -> np.ndarray:
    """Piecewise-smooth signal: random steps and ramps over a slow sinusoid."""
    x = np.arange(length, dtype=np.float64)
    sig = np.full(length, rng.uniform(0.3, 0.7))
    sig += rng.uniform(0.05, 0.15) * np.sin(2 * np.pi * rng.uniform(0.5, 4) * x / length
                                            + rng.uniform(0, 2 * np.pi))
    for _ in range(rng.integers(1, 4)):
        at = rng.integers(1, length)
        sig[at:] += rng.uniform(-0.25, 0.25)
    for _ in range(rng.integers(0, 3)):
        a, b = sorted(rng.integers(0, length, 2))
        if b > a:
            sig[a:b] += np.linspace(0.0, rng.uniform(-0.2, 0.2), b - a)
    return np.clip(sig, 0.0, 1.0)


def make_gaussian_point(dim: int, rng: np.random.Generator, n_components: int = 3,
                        spread: float = 0.05) -> np.ndarray:
    # component centres come from a fixed stream so every point shares one mixture
    centres = np.random.default_rng(1234).uniform(0.25, 0.75, size=(n_components, dim))
    k = rng.integers(n_components)
    return np.clip(centres[k] + spread * rng.standard_normal(dim), 0.0, 1.0)


def make_toy_dataset(kind: str, n: int, size: int, params: DegradationParams,
                     seed: int) -> list[SignalPair]:
    if kind not in KINDS:
        raise ValueError(f"unknown dataset kind {kind!r}; expected one of {KINDS}")
    if n < 1:
        raise ValueError("n must be >= 1")
    pairs = []
    for child in np.random.SeedSequence(seed).spawn(n):
        rng = np.random.default_rng(child)
        if kind == "textures2d":
            hr = make_texture(size, rng)
        elif kind == "signals1d":
            hr = make_signal1d(size, rng)
        else:
            hr = make_gaussian_point(size, rng)
        lr, info = degrade(hr, params, rng, return_info=True)
        pairs.append(SignalPair(hr, lr, params.factor, info))
    return pairs
