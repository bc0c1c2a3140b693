import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import seerzsl.autodiff as ad
from seerzsl.autodiff import NonFiniteError, ShapeError, Tensor

from conftest import fd_gradients, rel_error


class TestOpExamples:
    def test_relu(self):
        out = ad.relu(Tensor([-1.0, 0.0, 2.0]))
        assert np.array_equal(out.data, [0.0, 0.0, 2.0])

    def test_matmul_1x1(self):
        out = ad.matmul(Tensor([[3.0]]), Tensor([[4.0]]))
        assert out.data[0, 0] == 12.0

    def test_l2_norm_rows(self):
        out = ad.l2_norm_rows(Tensor([[3.0, 4.0]]))
        assert out.data[0] == 5.0

    def test_matmul_shape_mismatch(self):
        with pytest.raises(ShapeError):
            ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_binary_shape_mismatch(self):
        with pytest.raises(ShapeError):
            ad.add(Tensor(np.ones(3)), Tensor(np.ones(4)))

    def test_non_finite_reports_node(self):
        with pytest.raises(NonFiniteError, match="exp"):
            ad.exp(Tensor(1000.0))

    def test_leaf_rejects_nan(self):
        with pytest.raises(NonFiniteError):
            Tensor([np.nan])

    def test_concat_slice_round_trip(self):
        a = np.arange(6.0).reshape(2, 3)
        b = np.arange(4.0).reshape(2, 2)
        joined = ad.concat([Tensor(a), Tensor(b)], axis=1)
        assert joined.shape == (2, 5)
        assert np.array_equal(ad.narrow(joined, 1, 0, 3).data, a)
        assert np.array_equal(ad.narrow(joined, 1, 3, 5).data, b)

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        probs = ad.softmax(Tensor(rng.normal(0, 5, (7, 4)))).data
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-6)

    def test_softmax_cross_entropy_matches_manual(self):
        rng = np.random.default_rng(1)
        logits = rng.normal(0, 2, (5, 3))
        onehot = np.eye(3)[rng.integers(0, 3, 5)]
        got = ad.softmax_cross_entropy(Tensor(logits), onehot).item()
        shifted = logits - logits.max(axis=1, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=1)) + logits.max(axis=1)
        want = float(np.mean(lse - (logits * onehot).sum(axis=1)))
        assert abs(got - want) < 1e-12

    def test_immutable_data(self):
        t = Tensor([1.0, 2.0])
        with pytest.raises(ValueError):
            t.data[0] = 5.0


class TestBackward:
    def test_square_first_and_second_order(self):
        x = Tensor(3.0)
        y = ad.square(x)
        g = ad.gradients(y, [x])[0]
        assert g.item() == 6.0
        g2 = ad.gradients(g, [x])[0]
        assert g2.item() == 2.0

    def test_backward_returns_every_leaf(self):
        x = Tensor([1.0, 2.0])
        w = Tensor([3.0, 4.0])
        loss = ad.tsum(x * w)
        grads = ad.backward(loss)
        assert np.array_equal(grads[x].data, w.data)
        assert np.array_equal(grads[w].data, x.data)

    def test_root_must_be_scalar(self):
        x = Tensor([1.0, 2.0])
        with pytest.raises(ShapeError):
            ad.gradients(x * 2.0, [x])

    def test_unconnected_wrt_raises(self):
        x = Tensor(1.0)
        y = Tensor(2.0)
        with pytest.raises(ad.AutodiffError):
            ad.gradients(ad.square(x), [y])

    @pytest.mark.parametrize("activation", ["relu", "sigmoid", "tanh", "none"])
    def test_two_layer_net_matches_finite_differences(self, activation):
        rng = np.random.default_rng(hash(activation) % 2**32)
        acts = {"relu": ad.relu, "sigmoid": ad.sigmoid, "tanh": ad.tanh, "none": lambda t: t}
        w1 = rng.normal(0.0, 0.6, (4, 6))
        b1 = rng.normal(0.0, 0.3, 6)
        w2 = rng.normal(0.0, 0.6, (6, 2))
        b2 = rng.normal(0.0, 0.3, 2)
        x = rng.normal(0.0, 1.0, (5, 4))
        target = rng.normal(0.0, 1.0, (5, 2))

        def loss_value(arrays):
            t1, t2, t3, t4 = (Tensor(a) for a in arrays)
            h = acts[activation](ad.add(ad.matmul(Tensor(x), t1), t2))
            out = ad.add(ad.matmul(h, t3), t4)
            return ad.tmean(ad.square(out - Tensor(target))).item()

        params = [Tensor(a) for a in (w1, b1, w2, b2)]
        h = acts[activation](ad.add(ad.matmul(Tensor(x), params[0]), params[1]))
        out = ad.add(ad.matmul(h, params[2]), params[3])
        loss = ad.tmean(ad.square(out - Tensor(target)))
        got = ad.gradients(loss, params)
        want = fd_gradients(loss_value, [w1, b1, w2, b2])
        for g, f in zip(got, want):
            assert rel_error(g.data, f) < 1e-6

    def test_determinism_bit_identical(self):
        def run():
            rng = np.random.default_rng(42)
            x = Tensor(rng.normal(0, 1, (8, 3)))
            w = Tensor(rng.normal(0, 1, (3, 3)))
            loss = ad.tmean(ad.square(ad.tanh(ad.matmul(x, w))))
            return ad.gradients(loss, [w])[0].numpy()

        first, second = run(), run()
        assert np.array_equal(first, second)

    @settings(max_examples=40, deadline=None)
    @given(a=st.floats(-10, 10, allow_nan=False), b=st.floats(-10, 10, allow_nan=False))
    def test_backward_linearity(self, a, b):
        x = Tensor([0.7, -1.3, 2.1])
        f = ad.tsum(ad.square(x))
        g = ad.tsum(ad.exp(x * 0.1))
        combined = ad.gradients(f * a + g * b, [x])[0].data
        parts = a * ad.gradients(f, [x])[0].data + b * ad.gradients(g, [x])[0].data
        assert np.max(np.abs(combined - parts)) < 1e-12


class TestGradNorm:
    def test_constant_gradient(self):
        for point in ([0.3, -2.0], [5.0, 1.0]):
            x = Tensor(point)
            score = ad.tsum(x * Tensor([1.0, 0.0]))
            assert abs(ad.grad_norm(score, x).item() - 1.0) < 1e-12

    def test_scalar_double(self):
        x = Tensor(4.2)
        assert abs(ad.grad_norm(x * 2.0, x).item() - 2.0) < 1e-12

    def test_quadratic_norm_and_second_order(self):
        x = Tensor([1.0, 1.0])
        f = ad.tsum(ad.square(x))
        gn = ad.grad_norm(f, x)
        assert abs(gn.item() - np.sqrt(8.0)) < 1e-12

        def gn_value(arrays):
            xt = Tensor(arrays[0])
            return ad.grad_norm(ad.tsum(ad.square(xt)), xt).item()

        got = ad.gradients(gn, [x])[0]
        want = fd_gradients(gn_value, [np.array([1.0, 1.0])])[0]
        assert rel_error(got.data, want) < 1e-6

    def test_not_an_ancestor(self):
        x = Tensor(1.0)
        other = Tensor(2.0)
        with pytest.raises(ad.AutodiffError):
            ad.grad_norm(ad.square(x), other)


class TestBroadcast:
    def test_bias_row(self):
        x = Tensor(np.ones((3, 2)))
        b = Tensor([1.0, 2.0])
        out = ad.add(x, b)
        assert np.array_equal(out.data, [[2.0, 3.0]] * 3)
        g = ad.gradients(ad.tsum(out), [b])[0]
        assert np.array_equal(g.data, [3.0, 3.0])

    def test_column_vector(self):
        x = Tensor(np.ones((2, 3)))
        c = Tensor([[1.0], [2.0]])
        out = ad.mul(x, c)
        assert np.array_equal(out.data, [[1.0] * 3, [2.0] * 3])
        g = ad.gradients(ad.tsum(out), [c])[0]
        assert np.array_equal(g.data, [[3.0], [3.0]])

    def test_scalar(self):
        x = Tensor([1.0, 2.0])
        g = ad.gradients(ad.tsum(x * 2.5), [x])[0]
        assert np.array_equal(g.data, [2.5, 2.5])

    def test_outer_broadcast_rejected(self):
        with pytest.raises(ShapeError):
            ad.add(Tensor(np.ones((3, 1))), Tensor(np.ones((1, 4))))
