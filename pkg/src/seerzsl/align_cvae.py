"""Conditional VAE aligning visual features and semantics in one latent space.

The conditional input is the concatenation of a visual feature vector and its
class semantics; encoder and decoder are additionally conditioned on the
semantics. The latent dimension equals the semantic dimension.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .nn import Adam, Dense, TrainControls, _draw_mask, clip_global_norm, schedule_step
from .semantic_vae import kl_divergence

__all__ = [
    "AlignCvae",
    "build_conditional_input",
    "cvae_loss",
    "train_align_cvae",
]


def build_conditional_input(x: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Concatenate visual features with class semantics, rowwise for matrices."""
    x = np.asarray(x, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if x.ndim != s.ndim:
        raise ValueError(f"rank mismatch: features {x.shape} vs semantics {s.shape}")
    if x.ndim == 1:
        return np.concatenate([x, s])
    if x.shape[0] != s.shape[0]:
        raise ValueError(f"row mismatch: features {x.shape} vs semantics {s.shape}")
    return np.concatenate([x, s], axis=1)


def _rows(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    return Tensor(arr)


class AlignCvae:
    def __init__(self, visual_dim: int, sem_dim: int, hidden: int = 512,
                 dropout: float = 0.1, *, rng: np.random.Generator):
        self.visual_dim = visual_dim
        self.sem_dim = sem_dim
        self.z_dim = sem_dim  # latent lives at semantic dimensionality
        self.cond_dim = visual_dim + sem_dim  # length of the conditional input
        self.dropout = dropout
        self.encoder_hidden = Dense(self.cond_dim + sem_dim, hidden, "relu", rng=rng)
        self.encoder_head = Dense(hidden, 2 * sem_dim, "none", rng=rng)
        self.decoder_hidden = Dense(sem_dim + sem_dim, hidden, "relu", rng=rng)
        self.decoder_head = Dense(hidden, self.cond_dim, "none", rng=rng)

    def _maybe_drop(self, h: Tensor, training: bool, rng) -> Tensor:
        if training and self.dropout > 0.0:
            return h * Tensor(_draw_mask(h.shape, self.dropout, rng))
        return h

    def encode(self, x_prime, s, *, training: bool = False, rng=None) -> tuple[Tensor, Tensor]:
        x_prime = _rows(x_prime)
        s = _rows(s)
        if x_prime.shape[1] != self.cond_dim or s.shape[1] != self.sem_dim:
            raise ad.ShapeError(
                f"expected conditional input {self.cond_dim} and semantics {self.sem_dim}, "
                f"got {x_prime.shape[1]} and {s.shape[1]}"
            )
        h = self._maybe_drop(self.encoder_hidden(ad.concat([x_prime, s], axis=1)), training, rng)
        head = self.encoder_head(h)
        mu = ad.narrow(head, 1, 0, self.z_dim)
        logvar = ad.narrow(head, 1, self.z_dim, 2 * self.z_dim)
        return mu, logvar

    def decode(self, z, s, *, training: bool = False, rng=None) -> Tensor:
        z = _rows(z)
        s = _rows(s)
        if z.shape[1] != self.z_dim:
            raise ad.ShapeError(f"expected latent dim {self.z_dim}, got {z.shape[1]}")
        h = self._maybe_drop(self.decoder_hidden(ad.concat([z, s], axis=1)), training, rng)
        return self.decoder_head(h)

    def reparameterize(self, mu: Tensor, logvar: Tensor, eps) -> Tensor:
        eps = eps if isinstance(eps, Tensor) else Tensor(np.atleast_2d(eps))
        return mu + ad.exp(logvar * 0.5) * eps

    def embed_mu(self, x: np.ndarray, s: np.ndarray) -> np.ndarray:
        """Posterior mean for (x + s) pairs; the classification coordinates."""
        x_prime = build_conditional_input(np.atleast_2d(x), np.atleast_2d(s))
        mu, _ = self.encode(x_prime, np.atleast_2d(s))
        return mu.numpy()

    def params(self) -> list[Tensor]:
        out = []
        for layer in (self.encoder_hidden, self.encoder_head, self.decoder_hidden, self.decoder_head):
            out.extend(layer.params())
        return out

    def set_params(self, params: list[Tensor]) -> None:
        it = iter(params)
        for layer in (self.encoder_hidden, self.encoder_head, self.decoder_hidden, self.decoder_head):
            layer.set_params([next(it), next(it)])


def cvae_loss(cvae: AlignCvae, x_prime, s, beta: float, eps=None, *,
              training: bool = False, rng=None) -> Tensor:
    """Half summed squared reconstruction of the conditional input plus beta * KL."""
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    x_prime = _rows(x_prime)
    s = _rows(s)
    mu, logvar = cvae.encode(x_prime, s, training=training, rng=rng)
    if eps is None:
        eps = np.zeros(mu.shape)
    z = cvae.reparameterize(mu, logvar, Tensor(np.atleast_2d(eps)) if not isinstance(eps, Tensor) else eps)
    recon = cvae.decode(z, s, training=training, rng=rng)
    recon_term = ad.tmean(ad.tsum(ad.square(x_prime - recon), axis=1)) * 0.5
    return recon_term + kl_divergence(mu, logvar) * float(beta)


def train_align_cvae(cvae: AlignCvae, real_x: np.ndarray, real_s: np.ndarray,
                     gen_x: np.ndarray, gen_s: np.ndarray, *, beta: float,
                     mix_generated: float, epochs: int, batch_size: int,
                     controls: TrainControls, adam: Adam,
                     rng: np.random.Generator, epoch_offset: int = 0,
                     clip: float | None = None) -> dict[str, list[float]]:
    """Train on batches mixing real and generated (feature, semantics) pairs."""
    if not 0.0 <= mix_generated <= 1.0:
        raise ValueError(f"mix_generated must lie in [0, 1], got {mix_generated}")
    real_prime = build_conditional_input(real_x, real_s)
    gen_prime = build_conditional_input(gen_x, gen_s) if len(gen_x) else np.zeros((0, real_prime.shape[1]))
    n_real = real_prime.shape[0]
    n_gen = gen_prime.shape[0]
    steps = max(1, n_real // batch_size)
    bs_gen = int(round(batch_size * mix_generated)) if n_gen else 0
    bs_real = batch_size - bs_gen
    curve: dict[str, list[float]] = {"loss": [], "kl": []}
    for epoch in range(epochs):
        lr, _ = schedule_step(controls, epoch_offset + epoch, None)
        losses, kls = [], []
        for _ in range(steps):
            sel_r = rng.integers(0, n_real, size=bs_real)
            xp = real_prime[sel_r]
            ss = real_s[sel_r]
            if bs_gen:
                sel_g = rng.integers(0, n_gen, size=bs_gen)
                xp = np.concatenate([xp, gen_prime[sel_g]], axis=0)
                ss = np.concatenate([ss, gen_s[sel_g]], axis=0)
            x_t = Tensor(xp)
            s_t = Tensor(ss)
            mu, logvar = cvae.encode(x_t, s_t, training=True, rng=rng)
            eps = Tensor(rng.standard_normal(mu.shape))
            z = cvae.reparameterize(mu, logvar, eps)
            recon = cvae.decode(z, s_t, training=True, rng=rng)
            kl = kl_divergence(mu, logvar)
            loss = ad.tmean(ad.tsum(ad.square(x_t - recon), axis=1)) * 0.5 + kl * float(beta)
            params = cvae.params()
            grads = [g.data for g in ad.gradients(loss, params, allow_unused=True)]
            if clip is not None:
                grads = clip_global_norm(grads, clip)
            new = adam.step([p.data for p in params], grads, lr)
            cvae.set_params([Tensor(a, copy=False) for a in new])
            losses.append(loss.item())
            kls.append(kl.item())
        curve["loss"].append(float(np.mean(losses)))
        curve["kl"].append(float(np.mean(kls)))
    return curve
