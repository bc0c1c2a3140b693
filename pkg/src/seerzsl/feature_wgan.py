"""Wasserstein feature generator with gradient penalty and classifier guidance.

The generator maps semantic latents to pseudo visual features. The critic
scores realness; its loss carries a penalty pushing input-gradient norms to
one at random interpolates, computed with second-order-capable autodiff. A
frozen softmax classifier over seen classes steers the generator toward
class-consistent features.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .nn import Adam, Dense, Mlp, TrainControls, clip_global_norm, schedule_step

__all__ = [
    "Generator",
    "Critic",
    "GuidanceClassifier",
    "gradient_penalty",
    "critic_loss",
    "generator_loss",
    "train_guidance_classifier",
    "train_wgan",
]


def _rows(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    return Tensor(arr)


class Generator:
    """Relu MLP from the semantic latent to the visual feature space."""

    def __init__(self, z_dim: int, visual_dim: int, widths: tuple[int, ...] = (215, 516, 1024),
                 *, rng: np.random.Generator):
        self.z_dim = z_dim
        self.visual_dim = visual_dim
        self.net = Mlp([z_dim, *widths, visual_dim], "relu", "none", rng=rng)

    def __call__(self, z) -> Tensor:
        z = _rows(z)
        if z.shape[1] != self.z_dim:
            raise ad.ShapeError(f"expected latent dim {self.z_dim}, got {z.shape[1]}")
        return self.net(z)

    def params(self) -> list[Tensor]:
        return self.net.params()

    def set_params(self, params: list[Tensor]) -> None:
        self.net.set_params(params)


class Critic:
    """Mirror of the generator ending in a single unactivated score per sample."""

    def __init__(self, visual_dim: int, widths: tuple[int, ...] = (1024, 516, 215),
                 *, rng: np.random.Generator):
        self.visual_dim = visual_dim
        self.net = Mlp([visual_dim, *widths, 1], "relu", "none", rng=rng)

    def __call__(self, x) -> Tensor:
        x = _rows(x)
        if x.shape[1] != self.visual_dim:
            raise ad.ShapeError(f"expected visual dim {self.visual_dim}, got {x.shape[1]}")
        return ad.tsum(self.net(x), axis=1)  # (n, 1) -> (n,)

    def params(self) -> list[Tensor]:
        return self.net.params()

    def set_params(self, params: list[Tensor]) -> None:
        self.net.set_params(params)


class GuidanceClassifier:
    """Single affine map to seen-class logits with a softmax readout."""

    def __init__(self, visual_dim: int, class_ids: np.ndarray, *, rng: np.random.Generator):
        self.class_ids = np.sort(np.asarray(class_ids, dtype=np.int64))
        self.column_of = {int(c): i for i, c in enumerate(self.class_ids)}
        self.linear = Dense(visual_dim, len(self.class_ids), "none", rng=rng)

    def logits(self, x) -> Tensor:
        return self.linear(_rows(x))

    def predict_proba(self, x) -> np.ndarray:
        return ad.softmax(self.logits(x)).numpy()

    def onehot(self, labels: np.ndarray) -> np.ndarray:
        cols = np.array([self.column_of[int(y)] for y in labels])
        out = np.zeros((len(cols), len(self.class_ids)))
        out[np.arange(len(cols)), cols] = 1.0
        return out

    def cross_entropy(self, x, labels: np.ndarray) -> Tensor:
        return ad.softmax_cross_entropy(self.logits(x), self.onehot(labels))

    def accuracy(self, x: np.ndarray, labels: np.ndarray) -> float:
        proba = self.predict_proba(x)
        pred = self.class_ids[np.argmax(proba, axis=1)]
        return float(np.mean(pred == labels))

    def params(self) -> list[Tensor]:
        return self.linear.params()

    def set_params(self, params: list[Tensor]) -> None:
        self.linear.set_params(params)


def gradient_penalty(critic: Critic, x_real: np.ndarray, x_fake: np.ndarray,
                     alpha: float, rng: np.random.Generator) -> Tensor:
    """alpha * mean((||grad_x critic(x)||_2 - 1)^2) at per-pair uniform interpolates.

    Differentiable with respect to the critic parameters: the per-sample input
    gradients are recorded tensors, so the squared-norm deviation can be
    backpropagated again.
    """
    x_real = np.atleast_2d(np.asarray(x_real, dtype=np.float64))
    x_fake = np.atleast_2d(np.asarray(x_fake, dtype=np.float64))
    if x_real.shape != x_fake.shape:
        raise ad.ShapeError(f"batch mismatch: {x_real.shape} vs {x_fake.shape}")
    mix = rng.uniform(0.0, 1.0, size=(x_real.shape[0], 1))
    interp = Tensor(mix * x_real + (1.0 - mix) * x_fake)
    scores = critic(interp)
    grad = ad.gradients(ad.tsum(scores), [interp])[0]
    norms = ad.l2_norm_rows(grad)
    return ad.tmean(ad.square(norms - 1.0)) * float(alpha)


def critic_loss(critic: Critic, x_real: np.ndarray, x_fake: np.ndarray,
                alpha: float, rng: np.random.Generator) -> Tensor:
    """mean D(fake) - mean D(real) + gradient penalty; minimized over the critic."""
    loss = ad.tmean(critic(x_fake)) - ad.tmean(critic(x_real))
    if alpha != 0.0:
        loss = loss + gradient_penalty(critic, x_real, x_fake, alpha, rng)
    return loss


def generator_loss(generator: Generator, critic: Critic,
                   guidance: GuidanceClassifier | None, z: np.ndarray,
                   labels: np.ndarray | None, lam: float) -> Tensor:
    """-mean D(G(z)) plus lam-weighted guidance cross-entropy on G(z)."""
    if lam < 0:
        raise ValueError(f"guidance weight must be non-negative, got {lam}")
    x_hat = generator(z)
    loss = -ad.tmean(critic(x_hat))
    if lam != 0.0:
        if guidance is None or labels is None:
            raise ValueError("guidance term requested without a trained classifier")
        loss = loss + guidance.cross_entropy(x_hat, labels) * float(lam)
    return loss


def train_guidance_classifier(features: np.ndarray, labels: np.ndarray, *,
                              rng: np.random.Generator, class_ids=None,
                              epochs: int = 200, batch_size: int = 64,
                              base_lr: float = 1e-2, patience: int = 20) -> GuidanceClassifier:
    """Fit the softmax guidance head by cross-entropy with a 10% holdout stop."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    present = np.unique(labels)
    if class_ids is None:
        class_ids = present
    else:
        class_ids = np.sort(np.asarray(class_ids, dtype=np.int64))
        missing = np.setdiff1d(class_ids, present)
        if missing.size:
            raise ValueError(f"classes without samples: {missing.tolist()}")
    if len(class_ids) < 2:
        raise ValueError("guidance training needs at least two classes")

    n = len(labels)
    order = rng.permutation(n)
    n_val = max(1, n // 10)
    val_idx, fit_idx = order[:n_val], order[n_val:]

    clf = GuidanceClassifier(features.shape[1], class_ids, rng=rng)
    adam = Adam()
    controls = TrainControls(base_lr=base_lr, decay=1.0, patience=patience, mode="max")
    best_params = [p.numpy() for p in clf.params()]
    for epoch in range(epochs):
        perm = rng.permutation(fit_idx.size)
        for start in range(0, fit_idx.size, batch_size):
            sel = fit_idx[perm[start:start + batch_size]]
            loss = clf.cross_entropy(features[sel], labels[sel])
            params = clf.params()
            grads = ad.gradients(loss, params, allow_unused=True)
            new = adam.step([p.data for p in params], [g.data for g in grads], controls.base_lr)
            clf.set_params([Tensor(a, copy=False) for a in new])
        val_acc = clf.accuracy(features[val_idx], labels[val_idx])
        improved = controls.best is None or val_acc > controls.best
        _, stop = schedule_step(controls, epoch, val_acc)
        if improved:
            best_params = [p.numpy() for p in clf.params()]
        if stop:
            break
    clf.set_params([Tensor(p) for p in best_params])
    return clf


def train_wgan(generator: Generator, critic: Critic,
               guidance: GuidanceClassifier | None, features: np.ndarray,
               labels: np.ndarray, latent_fn, *, epochs: int, batch_size: int,
               n_critic: int, alpha: float, lam: float, controls: TrainControls,
               gen_adam: Adam, critic_adam: Adam, rng: np.random.Generator,
               epoch_offset: int = 0, clip: float | None = None) -> dict:
    """Alternating training with exactly ``n_critic`` critic steps per generator step.

    ``latent_fn(labels, rng)`` supplies generator inputs for a batch of class
    labels. Returns step counters plus per-epoch curves, including the
    Wasserstein estimate mean D(real) - mean D(fake).
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = features.shape[0]
    steps_per_epoch = max(1, n // batch_size)
    counters = {"critic_steps": 0, "generator_steps": 0}
    curve: dict[str, list[float]] = {"wasserstein": [], "generator": [], "penalty": []}

    def real_batch():
        sel = rng.integers(0, n, size=min(batch_size, n))
        return features[sel], labels[sel]

    for epoch in range(epochs):
        lr, _ = schedule_step(controls, epoch_offset + epoch, None)
        w_vals, g_vals, pen_vals = [], [], []
        for _ in range(steps_per_epoch):
            for _ in range(n_critic):
                xr, yr = real_batch()
                z = latent_fn(yr, rng)
                x_fake = generator(z).numpy()
                # one critic pass scores real and fake rows together
                m = xr.shape[0]
                scores = critic(np.concatenate([x_fake, xr], axis=0))
                fake_term = ad.tmean(ad.narrow(scores, 0, 0, m))
                real_term = ad.tmean(ad.narrow(scores, 0, m, 2 * m))
                pen = gradient_penalty(critic, xr, x_fake, alpha, rng)
                loss = fake_term - real_term + pen
                params = critic.params()
                grads = [g.data for g in ad.gradients(loss, params, allow_unused=True)]
                if clip is not None:
                    grads = clip_global_norm(grads, clip)
                new = critic_adam.step([p.data for p in params], grads, lr)
                critic.set_params([Tensor(a, copy=False) for a in new])
                counters["critic_steps"] += 1
                w_vals.append(real_term.item() - fake_term.item())
                pen_vals.append(pen.item())
            xr, yr = real_batch()
            z = latent_fn(yr, rng)
            loss = generator_loss(generator, critic, guidance, z, yr, lam)
            params = generator.params()
            grads = [g.data for g in ad.gradients(loss, params, allow_unused=True)]
            if clip is not None:
                grads = clip_global_norm(grads, clip)
            new = gen_adam.step([p.data for p in params], grads, lr)
            generator.set_params([Tensor(a, copy=False) for a in new])
            counters["generator_steps"] += 1
            g_vals.append(loss.item())
        curve["wasserstein"].append(float(np.mean(w_vals)))
        curve["generator"].append(float(np.mean(g_vals)))
        curve["penalty"].append(float(np.mean(pen_vals)))
    return {"counters": counters, "curve": curve}
