"""Small VAE-style autoencoder, identity codec for pixel-space runs, and a
hinge-loss discriminator."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteError, ShapeMismatchError
from .nn import MLP, AdamState, GradientTape, adam_step


@dataclass
class AutoEncoder:
    """Encoder emits ``[mean | logvar]``; the decoder maps latents back.

    ``z_shift``/``z_scale`` standardize encoder means into the unit-scale
    space the diffusion model runs in (see ``encode_latent``).
    """

    encoder: MLP
    decoder: MLP
    latent_dim: int
    z_shift: np.ndarray = field(default=None)  # type: ignore[assignment]
    z_scale: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.encoder.out_dim != 2 * self.latent_dim:
            raise ShapeMismatchError("encoder must output mean and logvar")
        if self.decoder.in_dim != self.latent_dim:
            raise ShapeMismatchError("decoder input must match latent dim")
        if self.z_shift is None:
            self.z_shift = np.zeros(self.latent_dim)
        if self.z_scale is None:
            self.z_scale = np.ones(self.latent_dim)

    @classmethod
    def create(cls, signal_dim: int, latent_dim: int, rng: np.random.Generator,
               hidden: int = 128) -> "AutoEncoder":
        enc = MLP.init([signal_dim, hidden, hidden, 2 * latent_dim],
                       ["silu", "silu", "identity"], rng)
        enc.biases[-1][latent_dim:] = -4.0  # start close to deterministic
        dec = MLP.init([latent_dim, hidden, hidden, signal_dim],
                       ["silu", "silu", "identity"], rng)
        return cls(enc, dec, latent_dim)

    @property
    def signal_dim(self) -> int:
        return self.encoder.in_dim

    def encode(self, x: np.ndarray, rng: np.random.Generator | None = None,
               deterministic: bool = False):
        """Returns ``(z, mean, logvar)``; ``z = mean`` in deterministic mode."""
        if x.shape[-1] != self.signal_dim:
            raise ShapeMismatchError(f"signal dim {x.shape[-1]} != {self.signal_dim}")
        out = self.encoder.forward(x)
        mean, logvar = out[..., : self.latent_dim], out[..., self.latent_dim:]
        if deterministic or rng is None:
            return mean.copy(), mean, logvar
        z = mean + np.exp(0.5 * logvar) * rng.standard_normal(mean.shape)
        return z, mean, logvar

    def encode_mean(self, x: np.ndarray) -> np.ndarray:
        return self.encode(x, deterministic=True)[1]

    def decode(self, z: np.ndarray) -> np.ndarray:
        if z.shape[-1] != self.latent_dim:
            raise ShapeMismatchError(f"latent dim {z.shape[-1]} != {self.latent_dim}")
        return self.decoder.forward(z)

    def fit_latent_stats(self, x: np.ndarray) -> None:
        mean = self.encode_mean(x)
        self.z_shift = mean.mean(axis=0)
        self.z_scale = np.maximum(mean.std(axis=0), 1e-6)

    def encode_latent(self, x: np.ndarray) -> np.ndarray:
        """Standardized encoder mean: the diffusion-space representation."""
        return (self.encode_mean(x) - self.z_shift) / self.z_scale

    def decode_latent(self, z: np.ndarray) -> np.ndarray:
        return self.decode(self.unstandardize(z))

    def unstandardize(self, z: np.ndarray) -> np.ndarray:
        return z * self.z_scale + self.z_shift

    def params(self) -> list[np.ndarray]:
        return self.encoder.params() + self.decoder.params()


class IdentityCodec:
    """Pixel-space stand-in: latent == signal, zero posterior variance."""

    def __init__(self, dim: int):
        self.latent_dim = dim

    @property
    def signal_dim(self) -> int:
        return self.latent_dim

    def _check(self, x):
        if x.shape[-1] != self.latent_dim:
            raise ShapeMismatchError(f"dim {x.shape[-1]} != {self.latent_dim}")

    def encode(self, x, rng=None, deterministic=False):
        self._check(x)
        return x.copy(), x, np.full_like(x, -np.inf)

    def encode_mean(self, x):
        self._check(x)
        return x

    def decode(self, z):
        self._check(z)
        return z

    encode_latent = encode_mean
    decode_latent = decode

    def params(self) -> list[np.ndarray]:
        return []


@dataclass
class Discriminator:
    mlp: MLP

    @classmethod
    def create(cls, signal_dim: int, rng: np.random.Generator,
               hidden: int = 128) -> "Discriminator":
        return cls(MLP.init([signal_dim, hidden, hidden, 1],
                            ["lrelu", "lrelu", "identity"], rng))

    def score(self, x: np.ndarray) -> np.ndarray:
        return self.mlp.forward(x)[..., 0]

    def params(self) -> list[np.ndarray]:
        return self.mlp.params()


def kl_standard_normal(mean: np.ndarray, logvar: np.ndarray) -> np.ndarray:
    """Closed-form KL(N(mean, exp(logvar)) || N(0, 1)) per element."""
    return 0.5 * (mean ** 2 + np.exp(logvar) - 1.0 - logvar)


def vae_pretrain_loss(x, x_rec, mean, logvar, kl_weight: float):
    """L1 reconstruction (elementwise mean) plus ``kl_weight`` times the KL
    summed over latent dims and averaged over the batch.

    Returns ``(loss, grads)`` with grads keyed ``x_rec``, ``mean``, ``logvar``.
    """
    if np.shape(x) != np.shape(x_rec) or np.shape(mean) != np.shape(logvar):
        raise ShapeMismatchError("reconstruction or posterior shapes disagree")
    batch = mean.shape[0] if mean.ndim > 1 else 1
    diff = x_rec - x
    rec = float(np.mean(np.abs(diff)))
    if np.all(np.isneginf(logvar)):
        kl = 0.0
        d_mean = np.zeros_like(mean)
        d_logvar = np.zeros_like(logvar)
    else:
        kl = float(kl_standard_normal(mean, logvar).sum() / batch)
        d_mean = kl_weight * mean / batch
        d_logvar = kl_weight * 0.5 * (np.exp(logvar) - 1.0) / batch
    loss = rec + kl_weight * kl
    if not np.isfinite(loss):
        raise NonFiniteError("autoencoder loss is not finite")
    grads = {"x_rec": np.sign(diff) / diff.size, "mean": d_mean, "logvar": d_logvar}
    return loss, grads


@dataclass
class AdversarialLosses:
    disc_loss: float
    gen_loss: float
    disc_tape: GradientTape | None = None
    fake_grad: np.ndarray | None = None


def adversarial_losses(disc: Discriminator, real: np.ndarray, fake: np.ndarray,
                       with_grads: bool = False) -> AdversarialLosses:
    """Hinge losses. ``disc_tape`` is the discriminator-parameter gradient of
    the discriminator loss; ``fake_grad`` is the gradient of the generator
    loss w.r.t. ``fake`` (the only path into the decoder)."""
    if real.shape[-1] != fake.shape[-1]:
        raise ShapeMismatchError("real and fake signals differ in size")
    d_real, cache_r = disc.mlp.forward(real, keep_cache=True)
    d_fake, cache_f = disc.mlp.forward(fake, keep_cache=True)
    d_real, d_fake = d_real[..., 0], d_fake[..., 0]
    disc_loss = float(np.mean(np.maximum(0.0, 1.0 - d_real)) + np.mean(np.maximum(0.0, 1.0 + d_fake)))
    gen_loss = float(-np.mean(d_fake))
    if not (np.isfinite(disc_loss) and np.isfinite(gen_loss)):
        raise NonFiniteError("adversarial loss is not finite")
    out = AdversarialLosses(disc_loss, gen_loss)
    if with_grads:
        g_real = -(1.0 - d_real > 0).astype(np.float64) / d_real.size
        g_fake = (1.0 + d_fake > 0).astype(np.float64) / d_fake.size
        tape = disc.mlp.backward(cache_r, g_real[..., None])
        tape += disc.mlp.backward(cache_f, g_fake[..., None])
        out.disc_tape = tape
        gen_tape = disc.mlp.backward(cache_f, np.full((d_fake.size, 1), -1.0 / d_fake.size))
        out.fake_grad = gen_tape.input_grad
    return out


def pretrain_autoencoder(ae: AutoEncoder, signals: np.ndarray, steps: int,
                         batch_size: int, lr: float, kl_weight: float,
                         rng: np.random.Generator) -> list[float]:
    """Fit encoder and decoder jointly; returns the per-step loss curve."""
    params = ae.params()
    opt = AdamState.for_params(params, lr)
    curve = []
    for _ in range(steps):
        x = signals[rng.integers(0, len(signals), size=batch_size)]
        enc_out, enc_cache = ae.encoder.forward(x, keep_cache=True)
        mean, logvar = enc_out[:, : ae.latent_dim], enc_out[:, ae.latent_dim:]
        eps = rng.standard_normal(mean.shape)
        std = np.exp(0.5 * logvar)
        z = mean + std * eps
        x_rec, dec_cache = ae.decoder.forward(z, keep_cache=True)
        loss, g = vae_pretrain_loss(x, x_rec, mean, logvar, kl_weight)
        dec_tape = ae.decoder.backward(dec_cache, g["x_rec"])
        dz = dec_tape.input_grad
        d_enc = np.concatenate([g["mean"] + dz, g["logvar"] + dz * eps * 0.5 * std], axis=1)
        enc_tape = ae.encoder.backward(enc_cache, d_enc)
        adam_step(params, enc_tape.grads + dec_tape.grads, opt)
        curve.append(loss)
    ae.fit_latent_stats(signals)
    return curve
