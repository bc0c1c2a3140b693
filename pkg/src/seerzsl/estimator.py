"""Scikit-learn style front end for the full generative ZSL pipeline.

``SeerZsl`` is a classifier whose training data covers only the seen classes;
attribute vectors for every class (seen and unseen) let it synthesize
features for classes without samples and classify over all of them.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .pipeline import RunConfig, _fit_bundle
from .prototypes import build_anchors, classify

__all__ = ["SeerZsl"]


class SeerZsl(BaseEstimator, ClassifierMixin):
    """Generative zero-shot classifier with a fit/predict surface.

    Parameters mirror the pipeline configuration. ``fit`` consumes seen-class
    samples plus the full class-attribute matrix; ``predict`` scores over all
    classes by default, so unseen classes are reachable at inference.
    """

    def __init__(self, z_dim: int = 48, beta_vae: float = 1.0, beta_cvae: float = 1.0,
                 lambda_guidance: float = 1.0, penalty_alpha: float = 10.0,
                 n_critic: int = 5, generator_widths: tuple = (215, 516, 1024),
                 vae_hidden: int = 256, cvae_hidden: int = 512, dropout: float = 0.1,
                 vae_epochs: int = 50, wgan_epochs: int = 12, cvae_epochs: int = 40,
                 guidance_epochs: int = 150, outer_iterations: int = 3,
                 batch_size: int = 64, learning_rate: float = 1e-3,
                 lr_decay: float = 0.97, mix_generated: float = 0.5,
                 anchor_samples: int = 100, random_state: int = 0):
        self.z_dim = z_dim
        self.beta_vae = beta_vae
        self.beta_cvae = beta_cvae
        self.lambda_guidance = lambda_guidance
        self.penalty_alpha = penalty_alpha
        self.n_critic = n_critic
        self.generator_widths = generator_widths
        self.vae_hidden = vae_hidden
        self.cvae_hidden = cvae_hidden
        self.dropout = dropout
        self.vae_epochs = vae_epochs
        self.wgan_epochs = wgan_epochs
        self.cvae_epochs = cvae_epochs
        self.guidance_epochs = guidance_epochs
        self.outer_iterations = outer_iterations
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.mix_generated = mix_generated
        self.anchor_samples = anchor_samples
        self.random_state = random_state

    def _config(self) -> RunConfig:
        return RunConfig(
            synthetic={"classes": 4},  # placeholder source; fit supplies data directly
            z_dim=self.z_dim, beta_vae=self.beta_vae, beta_cvae=self.beta_cvae,
            lambda_guidance=self.lambda_guidance, penalty_alpha=self.penalty_alpha,
            n_critic=self.n_critic, generator_widths=tuple(self.generator_widths),
            vae_hidden=self.vae_hidden, cvae_hidden=self.cvae_hidden,
            dropout=self.dropout, vae_epochs=self.vae_epochs,
            wgan_epochs=self.wgan_epochs, cvae_epochs=self.cvae_epochs,
            guidance_epochs=self.guidance_epochs, outer_iterations=self.outer_iterations,
            batch_size=self.batch_size, learning_rate=self.learning_rate,
            lr_decay=self.lr_decay, mix_generated=self.mix_generated,
            anchor_samples=self.anchor_samples, seed=self.random_state,
        )

    def fit(self, X, y, attributes, unseen_classes=None) -> "SeerZsl":
        """Train on seen-class samples.

        ``attributes`` has one row per class id (seen and unseen);
        ``unseen_classes`` lists ids without samples, reachable at predict
        time. Classes neither in ``y`` nor listed are still classifiable as
        long as they have an attribute row.
        """
        X, y = check_X_y(X, y, dtype=np.float64)
        attributes = check_array(attributes, dtype=np.float64)
        y = y.astype(np.int64)
        if y.min() < 0 or y.max() >= attributes.shape[0]:
            raise ValueError("labels must index attribute rows")
        config = self._config()
        config.validate()
        seen = np.unique(y)
        if unseen_classes is not None:
            overlap = np.intersect1d(seen, np.asarray(unseen_classes, dtype=np.int64))
            if overlap.size:
                raise ValueError(f"unseen classes with training samples: {overlap.tolist()}")
        bundle, curves, _ = _fit_bundle(
            X, y, attributes, seen, config, np.random.SeedSequence(self.random_state)
        )
        self.bundle_ = bundle
        self.curves_ = curves
        self.classes_ = np.arange(attributes.shape[0])
        self.anchors_ = build_anchors(bundle, self.classes_,
                                      per_class_samples=self.anchor_samples,
                                      seed=self.random_state)
        return self

    def predict(self, X, candidate_classes=None) -> np.ndarray:
        check_is_fitted(self, "bundle_")
        X = check_array(X, dtype=np.float64)
        candidates = self.classes_ if candidate_classes is None else candidate_classes
        return classify(self.bundle_, X, candidates, self.anchors_)

    def embed(self, X, class_id: int) -> np.ndarray:
        """Latent coordinates of samples paired with one class's semantics."""
        check_is_fitted(self, "bundle_")
        X = check_array(X, dtype=np.float64)
        return self.bundle_.embed(X, int(class_id))

    def synthesize(self, class_id: int, n_samples: int = 100,
                   random_state: int | None = None) -> np.ndarray:
        """Generate pseudo visual features for one class."""
        check_is_fitted(self, "bundle_")
        rng = np.random.default_rng(self.random_state if random_state is None else random_state)
        return self.bundle_.synthesize(np.full(n_samples, class_id, dtype=np.int64), rng)
