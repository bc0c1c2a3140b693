"""Generative zero-shot learning at desk scale.

Three trained stages: a semantic VAE compressing class attributes to a
latent code, a Wasserstein generator with gradient penalty and classifier
guidance mapping latents to pseudo visual features, and a conditional VAE
aligning features with semantics in a shared latent where a cosine
prototype classifier assigns labels.
"""

from .align_cvae import AlignCvae, build_conditional_input, cvae_loss
from .autodiff import Tensor, backward, grad_norm, gradients
from .bundle import ModelBundle
from .data import Dataset, SplitSpec, gzsl_split, load_dataset, make_synthetic, save_dataset
from .estimator import SeerZsl
from .evaluation import (
    MetricsReport,
    ablate_run,
    harmonic_mean,
    per_class_accuracy,
    precision_recall,
    sweep_run,
)
from .feature_wgan import (
    Critic,
    Generator,
    GuidanceClassifier,
    critic_loss,
    generator_loss,
    gradient_penalty,
    train_guidance_classifier,
)
from .nn import Adam, Dense, Mlp, TrainControls, dropout_mask, init_params, schedule_step
from .pipeline import RunConfig, train_full
from .prototypes import ClassAnchors, build_anchors, classify, cosine_distance
from .semantic_vae import SemanticVae, kl_divergence, vae_loss

__version__ = "0.1.0"

__all__ = [
    "AlignCvae",
    "Adam",
    "ClassAnchors",
    "Critic",
    "Dataset",
    "Dense",
    "Generator",
    "GuidanceClassifier",
    "MetricsReport",
    "Mlp",
    "ModelBundle",
    "RunConfig",
    "SeerZsl",
    "SemanticVae",
    "SplitSpec",
    "Tensor",
    "TrainControls",
    "ablate_run",
    "backward",
    "build_anchors",
    "build_conditional_input",
    "classify",
    "cosine_distance",
    "critic_loss",
    "cvae_loss",
    "dropout_mask",
    "generator_loss",
    "grad_norm",
    "gradient_penalty",
    "gradients",
    "gzsl_split",
    "harmonic_mean",
    "init_params",
    "kl_divergence",
    "load_dataset",
    "make_synthetic",
    "per_class_accuracy",
    "precision_recall",
    "save_dataset",
    "schedule_step",
    "sweep_run",
    "train_full",
    "train_guidance_classifier",
    "vae_loss",
]
