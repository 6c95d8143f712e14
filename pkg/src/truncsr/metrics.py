"""Fidelity metrics, run-to-run stability metrics and a sharpness proxy."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve2d

from .errors import ImageTooSmallError, InsufficientRunsError, ShapeMismatchError

PSNR_CEILING = 100.0
LAPLACIAN = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])


@dataclass
class RunStack:
    """N restorations of one input, stacked along axis 0."""

    image_id: str
    runs: np.ndarray

    def __post_init__(self):
        self.runs = np.asarray(self.runs, dtype=np.float64)
        if self.runs.ndim < 2:
            raise ShapeMismatchError("runs must be stacked along a leading axis")

    @property
    def N(self) -> int:
        return self.runs.shape[0]


@dataclass
class MetricMatrix:
    """Entry ``values[j, i]`` is metric ``name`` of run i on image j."""

    name: str
    values: np.ndarray
    image_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"metric matrix {self.name!r} has non-finite entries")


def _same_shape(a, b):
    if np.shape(a) != np.shape(b):
        raise ShapeMismatchError(f"{np.shape(a)} vs {np.shape(b)}")


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0,
         ceiling: float = PSNR_CEILING) -> float:
    _same_shape(a, b)
    if peak <= 0:
        raise ValueError("peak must be positive")
    mse = float(np.mean((np.asarray(a, np.float64) - np.asarray(b, np.float64)) ** 2))
    if mse == 0.0:
        return ceiling
    return min(10.0 * np.log10(peak * peak / mse), ceiling)


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax ** 2) / (2.0 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> float:
    """Mean SSIM over all full 11x11 Gaussian windows (sigma 1.5)."""
    _same_shape(a, b)
    a = np.asarray(a, np.float64)
    b = np.asarray(b, np.float64)
    if a.ndim != 2 or min(a.shape) < 11:
        raise ImageTooSmallError(f"SSIM needs a 2-D image of at least 11x11, got {a.shape}")
    win = gaussian_window()
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2

    def filt(x):
        return convolve2d(x, win, mode="valid")

    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a ** 2
    var_b = filt(b * b) - mu_b ** 2
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def _population_std(x: np.ndarray, axis: int) -> np.ndarray:
    # shift by the first run: identical runs give exactly zero
    d = x - np.take(x, [0], axis=axis)
    return np.sqrt(np.mean((d - d.mean(axis=axis, keepdims=True)) ** 2, axis=axis))


def g_std(matrix: MetricMatrix | np.ndarray) -> float:
    """Image-level stability: population STD over runs, averaged over images."""
    values = matrix.values if isinstance(matrix, MetricMatrix) else np.atleast_2d(matrix)
    if values.shape[1] < 2:
        raise InsufficientRunsError("G-STD needs at least two runs")
    return float(np.mean(_population_std(np.asarray(values, np.float64), axis=1)))


def l_std(stacks: RunStack | list[RunStack] | np.ndarray) -> float:
    """Pixel-level stability: per-location population STD over runs, averaged
    over locations and images."""
    if isinstance(stacks, RunStack):
        stacks = [stacks]
    elif isinstance(stacks, np.ndarray):
        stacks = [RunStack("0", stacks)]
    if not stacks:
        raise ValueError("no run stacks given")
    shape = stacks[0].runs.shape[1:]
    total = 0.0
    count = 0
    for s in stacks:
        if s.N < 2:
            raise InsufficientRunsError("L-STD needs at least two runs")
        if s.runs.shape[1:] != shape:
            raise ShapeMismatchError("all images must share one shape")
        sd = _population_std(s.runs, axis=0)
        total += float(sd.sum())
        count += sd.size
    return total / count


def band_energy(image: np.ndarray) -> float:
    """Mean squared 3x3 Laplacian response over the valid region."""
    image = np.asarray(image, np.float64)
    if image.ndim == 1:
        if image.size < 3:
            raise ImageTooSmallError("band energy needs at least 3 samples")
        resp = np.convolve(image, [1.0, -2.0, 1.0], mode="valid")
        return float(np.mean(resp ** 2))
    if image.ndim != 2 or min(image.shape) < 3:
        raise ImageTooSmallError(f"band energy needs at least 3x3, got {image.shape}")
    resp = convolve2d(image, LAPLACIAN, mode="valid")
    return float(np.mean(resp ** 2))


def rgb_to_luma(rgb: np.ndarray) -> np.ndarray:
    """BT.601 luma of an (..., 3) array."""
    return np.asarray(rgb, np.float64) @ np.array([0.299, 0.587, 0.114])
