"""Acceptance suite: one test per release criterion, each printing PASS lines.

The heavy criteria share the session-scoped benchmark run from conftest; the
ablation criterion trains its own grid of runs and is the slowest item.
"""

import json

import numpy as np
import pytest

import seerzsl.autodiff as ad
from seerzsl.autodiff import Tensor
from seerzsl.data import make_two_moons
from seerzsl.evaluation import harmonic_mean, precision_recall, ridge_nearest_mean_oracle
from seerzsl.feature_wgan import Critic, Generator, gradient_penalty, train_wgan
from seerzsl.nn import Adam, TrainControls
from seerzsl.pipeline import train_full
from seerzsl.semantic_vae import kl_gaussian_np

from conftest import fd_gradients, rel_error
from test_evaluation import brute_force_precision_recall


def report(criterion: str, detail: str):
    print(f"[acceptance] {criterion}: PASS ({detail})")


# Published GZSL scores (seen, unseen, printed harmonic mean). A handful of
# printed means disagree with their own operands by far more than rounding;
# no harmonic-mean implementation can reproduce those, so they are asserted
# to be source inconsistencies instead.
REFERENCE_ROWS = [
    ("AWA2", "f-VAEGAN-D2", 70.6, 57.6, 63.5), ("AWA2", "LisGAN", 76.3, 52.6, 62.3),
    ("AWA2", "GDAN", 67.5, 32.1, 43.5), ("AWA2", "IZF", 77.5, 60.6, 68.0),
    ("AWA2", "SDGZSL", 73.6, 64.6, 68.8), ("AWA2", "HSVA", 76.6, 53.9, 66.8),
    ("AWA2", "FREE+ESZSL", 78.0, 51.3, 61.8), ("AWA2", "TF-VAEGAN+ESZSL", 74.7, 55.2, 63.5),
    ("AWA2", "ZLAP", 76.3, 74.7, 75.5), ("AWA2", "SE-GZSL", 68.1, 58.3, 62.8),
    ("AWA2", "TPR", 87.1, 76.8, 81.6), ("AWA2", "MAIN", 81.8, 72.1, 76.7),
    ("AWA2", "ours", 78.8, 77.9, 78.3),
    ("CUB", "f-VAEGAN-D2", 60.1, 48.4, 53.6), ("CUB", "LisGAN", 57.9, 46.5, 51.6),
    ("CUB", "GDAN", 66.7, 39.3, 49.5), ("CUB", "IZF", 68.0, 52.7, 59.4),
    ("CUB", "SDGZSL", 66.4, 59.9, 63.0), ("CUB", "HSVA", 58.3, 57.2, 55.3),
    ("CUB", "FREE+ESZSL", 60.4, 51.6, 55.7), ("CUB", "TF-VAEGAN+ESZSL", 63.3, 51.1, 56.6),
    ("CUB", "ZLAP", 32.4, 25.5, 28.5), ("CUB", "SE-GZSL", 53.3, 41.5, 46.7),
    ("CUB", "TPR", 41.2, 26.8, 32.5), ("CUB", "MAIN", 58.7, 65.9, 62.1),
    ("CUB", "ours", 62.5, 66.3, 64.3),
    ("SUN", "f-VAEGAN-D2", 38.0, 45.1, 41.3), ("SUN", "LisGAN", 37.8, 42.9, 40.2),
    ("SUN", "GDAN", 40.9, 38.1, 53.4), ("SUN", "IZF", 57.0, 52.7, 54.8),
    ("SUN", "HSVA", 39.0, 48.6, 43.3), ("SUN", "FREE+ESZSL", 36.5, 48.2, 41.5),
    ("SUN", "TF-VAEGAN+ESZSL", 39.7, 44.0, 41.7), ("SUN", "ZLAP", 48.1, 47.2, 47.7),
    ("SUN", "SE-GZSL", 30.5, 50.9, 34.9), ("SUN", "TPR", 50.4, 45.4, 47.8),
    ("SUN", "MAIN", 40.0, 50.1, 48.8), ("SUN", "ours", 68.1, 66.6, 67.3),
    ("FLO", "f-VAEGAN-D2", 74.9, 56.8, 64.6), ("FLO", "LisGAN", 83.8, 57.7, 68.3),
    ("FLO", "SDGZSL", 90.2, 83.3, 86.6), ("FLO", "FREE+ESZSL", 82.2, 65.6, 72.9),
    ("FLO", "TF-VAEGAN+ESZSL", 83.2, 63.5, 72.1), ("FLO", "ZLAP", 68.2, 54.7, 60.7),
    ("FLO", "TPR", 77.5, 64.5, 70.4), ("FLO", "ours", 71.6, 68.0, 69.8),
]

# Rows whose printed harmonic mean is not the harmonic mean of the printed
# (S, U) pair: transcription defects in the published table.
KNOWN_MISPRINTS = {
    ("AWA2", "HSVA"), ("CUB", "HSVA"), ("SUN", "GDAN"), ("SUN", "SE-GZSL"), ("SUN", "MAIN"),
}


class TestCriterion1HarmonicMeanReproduction:
    def test_published_table(self):
        reproduced = 0
        for dataset, method, s, u, printed_h in REFERENCE_ROWS:
            computed = harmonic_mean(s, u)
            if (dataset, method) in KNOWN_MISPRINTS:
                # arithmetic of the source row is self-inconsistent
                assert abs(computed - printed_h) > 0.1, (dataset, method)
                continue
            assert abs(computed - printed_h) <= 0.1, (dataset, method, computed)
            reproduced += 1
        assert abs(harmonic_mean(78.8, 77.9) - 78.3) <= 0.1
        assert abs(harmonic_mean(70.6, 57.6) - 63.5) <= 0.1
        report("criterion 1 (harmonic-mean reproduction)",
               f"{reproduced}/{len(REFERENCE_ROWS)} rows reproduced within 0.1; "
               f"{len(KNOWN_MISPRINTS)} rows are self-inconsistent in the source")


class TestCriterion2GradientCorrectness:
    def test_first_order_layers_and_losses(self):
        rng = np.random.default_rng(0)
        worst = 0.0
        acts = {"relu": ad.relu, "sigmoid": ad.sigmoid, "tanh": ad.tanh, "none": lambda t: t}
        x = rng.normal(0, 1, (6, 5))
        target = rng.normal(0, 1, (6, 3))
        onehot = np.eye(3)[rng.integers(0, 3, 6)]
        losses = {
            "mse": lambda out: ad.tmean(ad.square(out - Tensor(target))),
            "cross-entropy": lambda out: ad.softmax_cross_entropy(out, onehot),
            "row-norm-deviation": lambda out: ad.tmean(ad.square(ad.l2_norm_rows(out) - 1.0)),
        }
        for activation, act in acts.items():
            for loss_name, loss_fn in losses.items():
                w1 = rng.normal(0, 0.7, (5, 8))
                b1 = rng.normal(0, 0.3, 8)
                w2 = rng.normal(0, 0.7, (8, 3))
                b2 = rng.normal(0, 0.3, 3)

                def value(arrays):
                    t1, t2, t3, t4 = (Tensor(a) for a in arrays)
                    h = act(ad.add(ad.matmul(Tensor(x), t1), t2))
                    return loss_fn(ad.add(ad.matmul(h, t3), t4)).item()

                params = [Tensor(a) for a in (w1, b1, w2, b2)]
                h = act(ad.add(ad.matmul(Tensor(x), params[0]), params[1]))
                loss = loss_fn(ad.add(ad.matmul(h, params[2]), params[3]))
                got = ad.gradients(loss, params, allow_unused=True)
                want = fd_gradients(value, [w1, b1, w2, b2])
                for g, f in zip(got, want):
                    err = rel_error(g.data, f)
                    worst = max(worst, err)
                    assert err < 1e-6, (activation, loss_name, err)
        report("criterion 2a (first-order gradients)", f"max relative error {worst:.2e} < 1e-6")

    def test_second_order_through_gradient_penalty(self):
        rng = np.random.default_rng(1)
        critic = Critic(4, widths=(7,), rng=rng)
        x_real = rng.normal(0, 1, (5, 4))
        x_fake = rng.normal(0, 1, (5, 4))

        def penalty_value(arrays):
            probe = Critic(4, widths=(7,), rng=np.random.default_rng(0))
            probe.set_params([Tensor(a) for a in arrays])
            return gradient_penalty(probe, x_real, x_fake, alpha=10.0,
                                    rng=np.random.default_rng(9)).item()

        pen = gradient_penalty(critic, x_real, x_fake, alpha=10.0,
                               rng=np.random.default_rng(9))
        got = ad.gradients(pen, critic.params(), allow_unused=True)
        want = fd_gradients(penalty_value, [p.numpy() for p in critic.params()])
        worst = max(rel_error(g.data, f) for g, f in zip(got, want))
        assert worst < 1e-4
        report("criterion 2b (second-order through gradient penalty)",
               f"max relative error {worst:.2e} < 1e-4")


class TestCriterion3KlOracle:
    def test_twenty_random_draws_against_monte_carlo(self):
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(20):
            dim = int(rng.integers(1, 6))
            mu = rng.normal(0.0, 1.2, (1, dim))
            logvar = rng.normal(0.0, 0.8, (1, dim))
            closed = kl_gaussian_np(mu, logvar)
            sigma = np.exp(0.5 * logvar)
            z = mu + sigma * rng.standard_normal((1_000_000, dim))
            log_q = -0.5 * (((z - mu) / sigma) ** 2 + np.log(2 * np.pi) + logvar).sum(axis=1)
            log_p = -0.5 * (z**2 + np.log(2 * np.pi)).sum(axis=1)
            mc = float(np.mean(log_q - log_p))
            err = abs(closed - mc) / max(abs(mc), 1e-12)
            worst = max(worst, err)
            assert err < 0.02
        report("criterion 3 (closed-form KL vs Monte Carlo)",
               f"worst relative error {worst:.4f} < 0.02 over 20 draws")


class TestCriterion4WganSanity:
    def test_two_moons_gradient_norms_and_wasserstein_shrink(self):
        points = make_two_moons(512, noise=0.05, seed=0)
        rng = np.random.default_rng(0)
        gen = Generator(8, 2, widths=(64, 64), rng=rng)
        critic = Critic(2, widths=(64, 64), rng=rng)
        labels = np.zeros(len(points), dtype=np.int64)
        out = train_wgan(
            gen, critic, None, points, labels,
            lambda lab, r: r.standard_normal((len(lab), 8)),
            epochs=30, batch_size=64, n_critic=5, alpha=10.0, lam=0.0,
            controls=TrainControls(), gen_adam=Adam(), critic_adam=Adam(), rng=rng,
        )
        curve = out["curve"]["wasserstein"]
        peak = max(curve)
        final = float(np.mean(curve[-3:]))
        assert final <= 0.5 * peak, (peak, final)

        # mean critic gradient norm at fresh interpolates
        probe_rng = np.random.default_rng(123)
        fake = gen(probe_rng.standard_normal((256, 8))).numpy()
        sel = probe_rng.integers(0, len(points), 256)
        mix = probe_rng.uniform(0, 1, (256, 1))
        interp = Tensor(mix * points[sel] + (1 - mix) * fake)
        grad = ad.gradients(ad.tsum(critic(interp)), [interp])[0]
        norms = np.linalg.norm(grad.data, axis=1)
        assert 0.8 <= norms.mean() <= 1.2, norms.mean()
        report("criterion 4 (WGAN-GP sanity on two moons)",
               f"mean interpolate gradient norm {norms.mean():.3f} in [0.8, 1.2]; "
               f"Wasserstein estimate shrank {100 * (1 - final / peak):.0f}% from peak")


class TestCriterion8PrecisionRecallOracle:
    def test_fifty_randomized_instances(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n_real = int(rng.integers(10, 200))
            n_gen = int(rng.integers(10, 200))
            d = int(rng.integers(2, 6))
            k = int(rng.integers(1, 5))
            real = rng.normal(0, 1, (n_real, d))
            gen = rng.normal(rng.uniform(-0.5, 0.5), rng.uniform(0.5, 1.5), (n_gen, d))
            fast = precision_recall(real, gen, k=k)
            slow = brute_force_precision_recall(real, gen, k)
            assert fast == pytest.approx(slow, abs=1e-12)
        identical = rng.normal(0, 1, (64, 3))
        assert precision_recall(identical, identical.copy(), k=3) == (1.0, 1.0)
        far = identical + 1e6
        assert precision_recall(identical, far, k=3) == (0.0, 0.0)
        report("criterion 8 (precision/recall vs brute force)",
               "50 randomized instances exact; identical sets (1,1); separated sets (0,0)")
