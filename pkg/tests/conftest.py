"""Shared fixtures and oracles for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from seerzsl.autodiff import Tensor
from seerzsl.data import make_synthetic, gzsl_split
from seerzsl.pipeline import RunConfig, train_full


def fd_gradients(f, arrays: list[np.ndarray], h: float = 1e-5) -> list[np.ndarray]:
    """Central finite differences of a scalar function of a list of arrays."""
    grads = []
    for pi, base in enumerate(arrays):
        g = np.zeros_like(base, dtype=np.float64)
        flat = g.ravel()
        for i in range(base.size):
            plus = [a.copy() for a in arrays]
            minus = [a.copy() for a in arrays]
            plus[pi].ravel()[i] += h
            minus[pi].ravel()[i] -= h
            flat[i] = (f(plus) - f(minus)) / (2.0 * h)
        grads.append(g)
    return grads


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    """Norm-wise relative difference, robust to tiny denominators."""
    num = np.linalg.norm(np.asarray(a) - np.asarray(b))
    den = max(np.linalg.norm(b), 1e-12)
    return float(num / den)


def tensors(*arrays) -> list[Tensor]:
    return [Tensor(a) for a in arrays]


@pytest.fixture(scope="session")
def benchmark_config() -> RunConfig:
    """Default configuration on the standard synthetic benchmark."""
    return RunConfig(
        synthetic={"classes": 20, "per_class": 50, "sem_dim": 16, "visual_dim": 64,
                   "noise_sigma": 0.1, "seed": 0},
        seed=0,
    )


@pytest.fixture(scope="session")
def benchmark_data(benchmark_config):
    dataset = make_synthetic(20, 50, 16, 64, 0.1, seed=0)
    split = gzsl_split(dataset, benchmark_config.unseen_fraction, benchmark_config.seed)
    return dataset, split


@pytest.fixture(scope="session")
def benchmark_run(benchmark_config, tmp_path_factory):
    """One full default-config training run, shared across test modules."""
    out = tmp_path_factory.mktemp("benchmark_run")
    bundle, report = train_full(benchmark_config, out_dir=out)
    return bundle, report, out


@pytest.fixture(scope="session")
def quick_config() -> RunConfig:
    """A few-second configuration for plumbing tests."""
    return RunConfig(
        synthetic={"classes": 6, "per_class": 12, "sem_dim": 4, "visual_dim": 8,
                   "noise_sigma": 0.1, "seed": 1},
        unseen_fraction=0.34,
        generator_widths=(16, 16),
        vae_hidden=16,
        cvae_hidden=16,
        z_dim=6,
        vae_epochs=3,
        wgan_epochs=2,
        cvae_epochs=3,
        guidance_epochs=5,
        outer_iterations=2,
        batch_size=16,
        anchor_samples=8,
        pr_neighbors=2,
        seed=1,
    )
