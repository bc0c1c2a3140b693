import numpy as np
import pytest

from seerzsl.autodiff import ShapeError, Tensor
from seerzsl.align_cvae import AlignCvae, build_conditional_input, cvae_loss


def zeroed_heads(cvae: AlignCvae) -> AlignCvae:
    for layer in (cvae.encoder_head, cvae.decoder_head):
        layer.set_params([Tensor(np.zeros(layer.weight.shape)),
                          Tensor(np.zeros(layer.bias.shape))])
    return cvae


@pytest.fixture
def cvae():
    return AlignCvae(visual_dim=6, sem_dim=3, hidden=16, rng=np.random.default_rng(0))


class TestConditionalInput:
    def test_vector_concatenation(self):
        out = build_conditional_input(np.array([1.0, 2.0]), np.array([3.0]))
        assert np.array_equal(out, [1.0, 2.0, 3.0])

    def test_zero_vectors(self):
        out = build_conditional_input(np.zeros(4), np.zeros(2))
        assert np.array_equal(out, np.zeros(6))

    def test_round_trip_slicing(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]])
        s = np.array([[5.0], [6.0]])
        joined = build_conditional_input(x, s)
        assert np.array_equal(joined[:, :2], x)
        assert np.array_equal(joined[:, 2:], s)

    def test_row_mismatch(self):
        with pytest.raises(ValueError):
            build_conditional_input(np.ones((2, 3)), np.ones((3, 1)))


class TestEncodeDecode:
    def test_zero_heads(self, cvae):
        zeroed_heads(cvae)
        x_prime = np.ones((2, 9))
        s = np.ones((2, 3))
        mu, logvar = cvae.encode(x_prime, s)
        assert np.array_equal(mu.data, np.zeros((2, 3)))
        assert np.array_equal(logvar.data, np.zeros((2, 3)))
        out = cvae.decode(np.ones((2, 3)), s)
        assert np.array_equal(out.data, np.zeros((2, 9)))

    def test_latent_dim_equals_semantic_dim(self, cvae):
        assert cvae.z_dim == 3
        mu, _ = cvae.encode(np.ones((1, 9)), np.ones((1, 3)))
        assert mu.shape == (1, 3)

    def test_decoder_output_covers_conditional_input(self, cvae):
        out = cvae.decode(np.zeros((1, 3)), np.zeros((1, 3)))
        assert out.shape == (1, 9)

    def test_deterministic(self, cvae):
        x_prime = np.linspace(0, 1, 9)[None, :]
        s = np.array([[0.5, 0.5, 0.5]])
        assert np.array_equal(cvae.encode(x_prime, s)[0].data,
                              cvae.encode(x_prime, s)[0].data)

    def test_dim_mismatch(self, cvae):
        with pytest.raises(ShapeError):
            cvae.encode(np.ones((1, 5)), np.ones((1, 3)))
        with pytest.raises(ShapeError):
            cvae.decode(np.ones((1, 2)), np.ones((1, 3)))


class TestLoss:
    def test_perfect_reconstruction_zero(self, cvae):
        zeroed_heads(cvae)
        x_prime = np.zeros((2, 9))
        s = np.zeros((2, 3))
        assert cvae_loss(cvae, x_prime, s, beta=1.0).item() == 0.0

    def test_beta_zero_pure_reconstruction(self, cvae):
        rng = np.random.default_rng(1)
        x_prime = rng.normal(0, 1, (4, 9))
        s = rng.normal(0, 1, (4, 3))
        loss = cvae_loss(cvae, x_prime, s, beta=0.0)
        mu, _ = cvae.encode(x_prime, s)
        recon = cvae.decode(mu, s)
        manual = 0.5 * float(np.mean(((x_prime - recon.data) ** 2).sum(axis=1)))
        assert abs(loss.item() - manual) < 1e-9

    def test_kl_block_scales_with_dim(self, cvae):
        # mu = 1, sigma = 1 in every latent dim contributes d/2
        from seerzsl.semantic_vae import kl_gaussian_np

        d = cvae.z_dim
        kl = kl_gaussian_np(np.ones((1, d)), np.zeros((1, d)))
        assert abs(kl - 0.5 * d) < 1e-12

    def test_negative_beta_rejected(self, cvae):
        with pytest.raises(ValueError):
            cvae_loss(cvae, np.zeros((1, 9)), np.zeros((1, 3)), beta=-0.1)
