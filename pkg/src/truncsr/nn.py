"""Dense networks with hand-written reverse-mode gradients, plus Adam.

All arrays are float64 and batched along the first axis.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatchError, StaleCacheError

ACTIVATIONS = ("silu", "lrelu", "identity")


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _act(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "silu":
        return z * _sigmoid(z)
    if kind == "lrelu":
        return np.where(z > 0, z, 0.2 * z)
    return z


def _act_grad(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "silu":
        s = _sigmoid(z)
        return s * (1.0 + z * (1.0 - s))
    if kind == "lrelu":
        return np.where(z > 0, 1.0, 0.2)
    return np.ones_like(z)


@dataclass
class GradientTape:
    """Gradients mirroring ``MLP.params()`` plus the gradient w.r.t. the input."""

    grads: list[np.ndarray]
    input_grad: np.ndarray | None = None

    def __iadd__(self, other: "GradientTape"):
        if len(other.grads) != len(self.grads):
            raise ShapeMismatchError("tapes belong to different networks")
        for g, h in zip(self.grads, other.grads):
            g += h
        return self

    def scale(self, c: float) -> "GradientTape":
        for g in self.grads:
            g *= c
        return self

    @classmethod
    def zeros_like(cls, params: list[np.ndarray]) -> "GradientTape":
        return cls([np.zeros_like(p) for p in params])


@dataclass
class MLP:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: list[str]

    def __post_init__(self):
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ShapeMismatchError("weights, biases and activations must align")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if b.shape != (w.shape[1],):
                raise ShapeMismatchError(f"layer {i}: bias {b.shape} vs weight {w.shape}")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ShapeMismatchError(f"layer {i} does not chain onto layer {i - 1}")
        for a in self.activations:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")

    @classmethod
    def init(cls, sizes: list[int], activations: list[str],
             rng: np.random.Generator) -> "MLP":
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(weights, biases, list(activations))

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "MLP":
        return MLP([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                   list(self.activations))

    def forward(self, x: np.ndarray, keep_cache: bool = False):
        if x.shape[-1] != self.in_dim:
            raise ShapeMismatchError(f"input dim {x.shape[-1]} != {self.in_dim}")
        cache = []
        h = x
        for w, b, kind in zip(self.weights, self.biases, self.activations):
            z = h @ w + b
            if keep_cache:
                cache.append((h, z))
            h = _act(kind, z)
        return (h, cache) if keep_cache else h

    def backward(self, cache, grad_out: np.ndarray) -> GradientTape:
        if len(cache) != len(self.weights):
            raise StaleCacheError("cache depth does not match network")
        grads: list[np.ndarray] = [None] * (2 * len(self.weights))  # type: ignore[list-item]
        g = grad_out
        for i in reversed(range(len(self.weights))):
            h, z = cache[i]
            w = self.weights[i]
            if h.shape[-1] != w.shape[0] or z.shape[-1] != w.shape[1] or z.shape != g.shape:
                raise StaleCacheError(f"cached activations of layer {i} do not fit")
            if self.activations[i] != "identity":
                g = g * _act_grad(self.activations[i], z)
            grads[2 * i] = h.T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ w.T
        return GradientTape(grads, input_grad=g)


def time_embed(t, dim: int, T: int) -> np.ndarray:
    """Sinusoidal embedding of ``t / T``; pairs are (sin, cos) at
    frequencies spaced geometrically from 1 to T."""
    if dim <= 0 or dim % 2:
        raise ValueError(f"time embedding dim must be even and positive, got {dim}")
    t = np.asarray(t, dtype=np.float64)
    half = dim // 2
    freqs = float(T) ** (np.arange(half) / max(half - 1, 1))
    arg = (t / T)[..., None] * freqs
    out = np.empty(arg.shape[:-1] + (dim,))
    out[..., 0::2] = np.sin(arg)
    out[..., 1::2] = np.cos(arg)
    return out


@dataclass
class DenoiserNet:
    """Noise predictor on ``[x_t | time_embed(t) | condition]``.

    With ``output="eps"`` the linear head is the noise estimate. With
    ``output="v"`` the head predicts v and the returned noise estimate is
    ``sqrt(1 - abar_t) x_t + sqrt(abar_t) v``, which keeps the implied clean
    estimate well conditioned when abar_t is tiny. ``alpha_bars`` (index t,
    with abar_0 = 1) is required for the v head.
    """

    mlp: MLP
    x_dim: int
    cond_dim: int
    time_dim: int
    T: int
    output: str = "eps"
    alpha_bars: np.ndarray | None = None

    def __post_init__(self):
        if self.output not in ("eps", "v"):
            raise ValueError(f"unknown output head {self.output!r}")
        if self.output == "v":
            if self.alpha_bars is None or len(self.alpha_bars) != self.T + 1:
                raise ValueError("v head needs alpha_bars for t = 0..T")
            self.alpha_bars = np.asarray(self.alpha_bars, dtype=np.float64)
        if self.mlp.in_dim != self.x_dim + self.time_dim + self.cond_dim:
            raise ShapeMismatchError("network input does not match x/time/condition dims")
        if self.mlp.out_dim != self.x_dim:
            raise ShapeMismatchError("network output must match x_t dim")

    @classmethod
    def create(cls, x_dim: int, cond_dim: int, T: int, rng: np.random.Generator,
               hidden: int = 128, depth: int = 2, time_dim: int = 32,
               output: str = "eps", alpha_bars=None) -> "DenoiserNet":
        sizes = [x_dim + time_dim + cond_dim] + [hidden] * depth + [x_dim]
        mlp = MLP.init(sizes, ["silu"] * depth + ["identity"], rng)
        return cls(mlp, x_dim, cond_dim, time_dim, T, output, alpha_bars)

    def _inputs(self, x_t, t, condition):
        if x_t.shape[-1] != self.x_dim:
            raise ShapeMismatchError(f"x_t dim {x_t.shape[-1]} != {self.x_dim}")
        if condition.shape[-1] != self.cond_dim:
            raise ShapeMismatchError(f"condition dim {condition.shape[-1]} != {self.cond_dim}")
        if condition.shape[:-1] != x_t.shape[:-1]:
            raise ShapeMismatchError("x_t and condition batch shapes differ")
        emb = time_embed(t, self.time_dim, self.T)
        emb = np.broadcast_to(emb, x_t.shape[:-1] + (self.time_dim,))
        return np.concatenate([x_t, emb, condition], axis=-1)

    def _v_coefficients(self, t):
        ab = self.alpha_bars[np.asarray(t, dtype=np.int64)]
        ab = np.asarray(ab)[..., None] if np.ndim(ab) else ab
        return np.sqrt(1.0 - ab), np.sqrt(ab)

    def forward(self, x_t: np.ndarray, t, condition: np.ndarray, keep_cache: bool = False):
        h = self.mlp.forward(self._inputs(x_t, t, condition), keep_cache)
        out, cache = h if keep_cache else (h, None)
        coef = None
        if self.output == "v":
            coef = self._v_coefficients(t)
            out = coef[0] * x_t + coef[1] * out
        return (out, (cache, coef)) if keep_cache else out

    __call__ = forward

    def backward(self, cache, grad_out: np.ndarray) -> GradientTape:
        """Parameter gradients; ``input_grad`` is the gradient w.r.t. x_t."""
        mlp_cache, coef = cache
        if coef is not None:
            tape = self.mlp.backward(mlp_cache, coef[1] * grad_out)
            tape.input_grad = tape.input_grad[..., : self.x_dim] + coef[0] * grad_out
        else:
            tape = self.mlp.backward(mlp_cache, grad_out)
            tape.input_grad = tape.input_grad[..., : self.x_dim]
        return tape

    def params(self) -> list[np.ndarray]:
        return self.mlp.params()


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[np.ndarray], lr: float, **kw) -> "AdamState":
        return cls(lr=lr, m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params], **kw)


def adam_step(params: list[np.ndarray], tape: GradientTape | list[np.ndarray],
              state: AdamState) -> AdamState:
    """Bias-corrected Adam update, applied to ``params`` in place."""
    grads = tape.grads if isinstance(tape, GradientTape) else tape
    if not (len(params) == len(grads) == len(state.m)):
        raise ShapeMismatchError("params, gradients and optimizer state disagree")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeMismatchError(f"parameter {p.shape} vs gradient {g.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state


def checksum(params: list[np.ndarray]) -> str:
    h = hashlib.sha256()
    for p in params:
        h.update(np.ascontiguousarray(p, dtype=np.float64).tobytes())
    return h.hexdigest()
