"""Probabilistic encoder/decoder over the semantic attribute space.

The encoder maps an attribute vector to a diagonal Gaussian over the latent
space; the decoder maps latents back to attributes. Training minimizes squared
reconstruction error plus a weighted closed-form KL against the standard
normal prior.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .nn import Adam, Dense, TrainControls, _draw_mask, clip_global_norm, schedule_step

__all__ = [
    "SemanticVae",
    "kl_divergence",
    "kl_gaussian_np",
    "vae_loss",
    "train_semantic_vae",
]


def _rows(value) -> Tensor:
    """Promote vectors to single-row matrices; pass tensors through."""
    if isinstance(value, Tensor):
        return value
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    return Tensor(arr)


class SemanticVae:
    def __init__(self, sem_dim: int, z_dim: int = 48, hidden: int = 256,
                 dropout: float = 0.1, *, rng: np.random.Generator):
        self.sem_dim = sem_dim
        self.z_dim = z_dim
        self.dropout = dropout
        self.encoder_hidden = Dense(sem_dim, hidden, "relu", rng=rng)
        self.encoder_head = Dense(hidden, 2 * z_dim, "none", rng=rng)
        self.decoder_hidden = Dense(z_dim, hidden, "relu", rng=rng)
        self.decoder_head = Dense(hidden, sem_dim, "none", rng=rng)

    def _maybe_drop(self, h: Tensor, training: bool, rng) -> Tensor:
        if training and self.dropout > 0.0:
            return h * Tensor(_draw_mask(h.shape, self.dropout, rng))
        return h

    def encode(self, s, *, training: bool = False, rng=None) -> tuple[Tensor, Tensor]:
        s = _rows(s)
        if s.shape[1] != self.sem_dim:
            raise ad.ShapeError(f"expected semantic dim {self.sem_dim}, got {s.shape[1]}")
        h = self._maybe_drop(self.encoder_hidden(s), training, rng)
        head = self.encoder_head(h)
        mu = ad.narrow(head, 1, 0, self.z_dim)
        logvar = ad.narrow(head, 1, self.z_dim, 2 * self.z_dim)
        return mu, logvar

    def reparameterize(self, mu: Tensor, logvar: Tensor, eps) -> Tensor:
        eps = _rows(eps) if not isinstance(eps, Tensor) else eps
        if eps.shape != mu.shape:
            raise ad.ShapeError(f"eps shape {eps.shape} does not match mu {mu.shape}")
        return mu + ad.exp(logvar * 0.5) * eps

    def decode(self, z, *, training: bool = False, rng=None) -> Tensor:
        z = _rows(z)
        if z.shape[1] != self.z_dim:
            raise ad.ShapeError(f"expected latent dim {self.z_dim}, got {z.shape[1]}")
        h = self._maybe_drop(self.decoder_hidden(z), training, rng)
        return self.decoder_head(h)

    def params(self) -> list[Tensor]:
        out = []
        for layer in (self.encoder_hidden, self.encoder_head, self.decoder_hidden, self.decoder_head):
            out.extend(layer.params())
        return out

    def set_params(self, params: list[Tensor]) -> None:
        it = iter(params)
        for layer in (self.encoder_hidden, self.encoder_head, self.decoder_hidden, self.decoder_head):
            layer.set_params([next(it), next(it)])

    # numpy fast paths for inference-time consumers

    def encode_mu_np(self, s_rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        mu, logvar = self.encode(s_rows)
        return mu.numpy(), logvar.numpy()


def kl_divergence(mu: Tensor, logvar: Tensor) -> Tensor:
    """Batch-mean KL(N(mu, sigma^2) || N(0, I)), closed form."""
    per_sample = ad.tsum(
        ad.square(mu) + ad.exp(logvar) - 1.0 - logvar, axis=1
    ) * 0.5
    return ad.tmean(per_sample)


def kl_gaussian_np(mu: np.ndarray, logvar: np.ndarray) -> float:
    """Closed-form KL as above, straight numpy, batch mean."""
    mu = np.atleast_2d(np.asarray(mu, dtype=np.float64))
    logvar = np.atleast_2d(np.asarray(logvar, dtype=np.float64))
    per_sample = 0.5 * (mu**2 + np.exp(logvar) - 1.0 - logvar).sum(axis=1)
    return float(per_sample.mean())


def vae_loss(s, s_hat: Tensor, mu: Tensor, logvar: Tensor, beta: float) -> Tensor:
    """Gaussian reconstruction (half summed squared error) plus beta-weighted KL."""
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    s = _rows(s)
    recon = ad.tmean(ad.tsum(ad.square(s - s_hat), axis=1)) * 0.5
    return recon + kl_divergence(mu, logvar) * float(beta)


def train_semantic_vae(vae: SemanticVae, sem_rows: np.ndarray, *, beta: float,
                       epochs: int, batch_size: int, controls: TrainControls,
                       adam: Adam, rng: np.random.Generator,
                       epoch_offset: int = 0, clip: float | None = None) -> dict[str, list[float]]:
    """Minibatch training on per-sample semantics; returns loss/KL curves."""
    n = sem_rows.shape[0]
    curve: dict[str, list[float]] = {"loss": [], "kl": []}
    for epoch in range(epochs):
        lr, _ = schedule_step(controls, epoch_offset + epoch, None)
        order = rng.permutation(n)
        losses, kls = [], []
        for start in range(0, n, batch_size):
            batch = sem_rows[order[start:start + batch_size]]
            s_t = Tensor(batch)
            mu, logvar = vae.encode(s_t, training=True, rng=rng)
            eps = Tensor(rng.standard_normal(mu.shape))
            z = vae.reparameterize(mu, logvar, eps)
            s_hat = vae.decode(z, training=True, rng=rng)
            kl = kl_divergence(mu, logvar)
            loss = ad.tmean(ad.tsum(ad.square(s_t - s_hat), axis=1)) * 0.5 + kl * float(beta)
            params = vae.params()
            grads = [g.data for g in ad.gradients(loss, params, allow_unused=True)]
            if clip is not None:
                grads = clip_global_norm(grads, clip)
            new = adam.step([p.data for p in params], grads, lr)
            vae.set_params([Tensor(a, copy=False) for a in new])
            losses.append(loss.item())
            kls.append(kl.item())
        curve["loss"].append(float(np.mean(losses)))
        curve["kl"].append(float(np.mean(kls)))
    return curve
