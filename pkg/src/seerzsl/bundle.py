"""All trained stages plus preprocessing state, with archive persistence."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .align_cvae import AlignCvae, build_conditional_input
from .archive import load_arrays, save_arrays
from .autodiff import Tensor
from .feature_wgan import Critic, Generator, GuidanceClassifier
from .nn import Adam
from .semantic_vae import SemanticVae

__all__ = ["ModelBundle"]

_NOISE_STAGES = (None, "none", "vae", "wgan", "cvae")


@dataclass
class ModelBundle:
    """Learnable state of the full pipeline and its semantic scaler.

    ``ablate`` names a stage whose outputs are replaced with standard normal
    noise of matching shape; the stage itself is left untrained.
    """

    vae: SemanticVae
    generator: Generator
    critic: Critic
    cvae: AlignCvae
    attributes: np.ndarray
    attr_mean: np.ndarray
    attr_std: np.ndarray
    guidance: GuidanceClassifier | None = None
    ablate: str | None = None
    optimizers: dict = field(default_factory=dict)
    epoch_offsets: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.ablate not in _NOISE_STAGES:
            raise ValueError(f"unknown ablation stage {self.ablate!r}")
        if self.ablate == "none":
            self.ablate = None
        for name in ("vae", "generator", "critic", "cvae"):
            self.optimizers.setdefault(name, Adam())
            self.epoch_offsets.setdefault(name, 0)

    # -- dimensions ---------------------------------------------------------

    @property
    def n_classes(self) -> int:
        return self.attributes.shape[0]

    @property
    def sem_dim(self) -> int:
        return self.attributes.shape[1]

    @property
    def visual_dim(self) -> int:
        return self.generator.visual_dim

    @property
    def z_dim(self) -> int:
        return self.vae.z_dim

    # -- semantic preprocessing ----------------------------------------------

    def semantics_of(self, labels: np.ndarray) -> np.ndarray:
        """Standardized per-sample semantics for a label vector."""
        labels = np.asarray(labels, dtype=np.int64)
        return (self.attributes[labels] - self.attr_mean) / self.attr_std

    # -- stage outputs with ablation substitution -----------------------------

    def draw_latents(self, labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        labels = np.asarray(labels, dtype=np.int64)
        if self.ablate == "vae":
            return rng.standard_normal((labels.size, self.z_dim))
        mu, logvar = self.vae.encode(self.semantics_of(labels))
        eps = rng.standard_normal(mu.shape)
        return mu.numpy() + np.exp(0.5 * logvar.numpy()) * eps

    def synthesize(self, labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        labels = np.asarray(labels, dtype=np.int64)
        z = self.draw_latents(labels, rng)
        if self.ablate == "wgan":
            return rng.standard_normal((labels.size, self.visual_dim))
        return self.generator(z).numpy()

    def embed(self, features: np.ndarray, class_id: int,
              rng: np.random.Generator | None = None) -> np.ndarray:
        """Latent coordinates of features paired with one class's semantics."""
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if self.ablate == "cvae":
            if rng is None:
                raise ValueError("ablated embeddings need an rng for the noise draw")
            return rng.standard_normal((features.shape[0], self.cvae.z_dim))
        sem = np.tile(self.semantics_of(np.array([class_id]))[0], (features.shape[0], 1))
        return self.cvae.embed_mu(features, sem)

    def embed_generated(self, class_id: int, n: int, rng: np.random.Generator) -> np.ndarray:
        labels = np.full(n, class_id, dtype=np.int64)
        x_hat = self.synthesize(labels, rng)
        return self.embed(x_hat, class_id, rng=rng)

    # -- persistence -----------------------------------------------------------

    def _named_params(self) -> dict[str, np.ndarray]:
        arrays: dict[str, np.ndarray] = {}
        stages = {"vae": self.vae, "generator": self.generator,
                  "critic": self.critic, "cvae": self.cvae}
        for stage, model in stages.items():
            for i, p in enumerate(model.params()):
                arrays[f"{stage}.p{i}"] = p.data
        if self.guidance is not None:
            for i, p in enumerate(self.guidance.params()):
                arrays[f"guidance.p{i}"] = p.data
        for stage, adam in self.optimizers.items():
            for key, arr in adam.state_arrays().items():
                arrays[f"opt.{stage}.{key}"] = arr
        return arrays

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        arrays = self._named_params()
        arrays["scaler.mean"] = self.attr_mean
        arrays["scaler.std"] = self.attr_std
        arrays["attributes"] = self.attributes
        save_arrays(directory / "model", arrays)
        meta = {
            "z_dim": self.z_dim,
            "sem_dim": self.sem_dim,
            "visual_dim": self.visual_dim,
            "n_classes": self.n_classes,
            "vae_hidden": self.vae.encoder_hidden.weight.shape[1],
            "cvae_hidden": self.cvae.encoder_hidden.weight.shape[1],
            "generator_widths": [l.weight.shape[1] for l in self.generator.net.layers[:-1]],
            "critic_widths": [l.weight.shape[1] for l in self.critic.net.layers[:-1]],
            "dropout": self.vae.dropout,
            "ablate": self.ablate,
            "guidance_classes": (
                self.guidance.class_ids.tolist() if self.guidance is not None else None
            ),
            "epoch_offsets": self.epoch_offsets,
        }
        (directory / "model.json").write_text(json.dumps(meta, indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, directory: str | Path) -> "ModelBundle":
        directory = Path(directory)
        meta = json.loads((directory / "model.json").read_text(encoding="utf-8"))
        arrays = load_arrays(directory / "model")
        rng = np.random.default_rng(0)  # placeholder init, overwritten below
        vae = SemanticVae(meta["sem_dim"], meta["z_dim"], meta["vae_hidden"],
                          meta["dropout"], rng=rng)
        generator = Generator(meta["z_dim"], meta["visual_dim"],
                              tuple(meta["generator_widths"]), rng=rng)
        critic = Critic(meta["visual_dim"], tuple(meta["critic_widths"]), rng=rng)
        cvae = AlignCvae(meta["visual_dim"], meta["sem_dim"], meta["cvae_hidden"],
                         meta["dropout"], rng=rng)
        guidance = None
        if meta["guidance_classes"] is not None:
            guidance = GuidanceClassifier(meta["visual_dim"],
                                          np.array(meta["guidance_classes"]), rng=rng)
        bundle = cls(
            vae=vae, generator=generator, critic=critic, cvae=cvae,
            attributes=arrays["attributes"], attr_mean=arrays["scaler.mean"],
            attr_std=arrays["scaler.std"], guidance=guidance, ablate=meta["ablate"],
            epoch_offsets={k: int(v) for k, v in meta["epoch_offsets"].items()},
        )
        stages = {"vae": vae, "generator": generator, "critic": critic, "cvae": cvae}
        for stage, model in stages.items():
            count = len(model.params())
            model.set_params([Tensor(arrays[f"{stage}.p{i}"]) for i in range(count)])
        if guidance is not None:
            guidance.set_params([Tensor(arrays["guidance.p0"]), Tensor(arrays["guidance.p1"])])
        for stage in stages:
            opt_keys = {k.split(".", 2)[2]: v for k, v in arrays.items()
                        if k.startswith(f"opt.{stage}.")}
            if opt_keys:
                bundle.optimizers[stage].load_state_arrays(opt_keys)
        return bundle
