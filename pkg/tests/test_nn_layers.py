import numpy as np
import pytest
from scipy import signal

from scriptorium.nn import layers as L


def numeric_grad(f, x, h=1e-3):
    """Central finite differences of scalar f with respect to array x."""
    grad = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + h
        fp = f()
        x[idx] = orig - h
        fm = f()
        x[idx] = orig
        grad[idx] = (fp - fm) / (2 * h)
        it.iternext()
    return grad


def check_layer_grads(layer, x, train=False, rng=None, atol=2e-3):
    """Backward pass must match finite differences of sum(out * R)."""
    rng_fixed = np.random.default_rng(0)
    out = layer.forward(x.copy(), train=train, rng=np.random.default_rng(42))
    r = rng_fixed.standard_normal(out.shape).astype(np.float32)

    def loss_fn():
        return float((layer.forward(x, train=train, rng=np.random.default_rng(42)) * r).sum())

    layer.forward(x, train=train, rng=np.random.default_rng(42))
    layer.zero_grads()
    dx = layer.backward(r.copy())
    np.testing.assert_allclose(dx, numeric_grad(loss_fn, x), atol=atol)

    analytic = {k: v.copy() for k, v in layer.grads().items()}
    for name, param in layer.params().items():
        np.testing.assert_allclose(
            analytic[name], numeric_grad(loss_fn, param), atol=atol, err_msg=name
        )


class TestConv2d:
    def test_delta_image_reproduces_kernel(self):
        # convolving a centered delta copies the (flipped-correlation) kernel
        rng = np.random.default_rng(1)
        conv = L.Conv2d("c", 1, 1, (3, 3), (1, 1), rng)
        x = np.zeros((1, 1, 5, 5), dtype=np.float32)
        x[0, 0, 2, 2] = 1.0
        out = conv.forward(x) - conv.bias[0]
        # direct hand sum: out[i,j] = sum_{ki,kj} w[ki,kj] * x[i+ki-1, j+kj-1]
        expected = np.zeros((5, 5), dtype=np.float32)
        for i in range(5):
            for j in range(5):
                acc = 0.0
                for ki in range(3):
                    for kj in range(3):
                        si, sj = i + ki - 1, j + kj - 1
                        if 0 <= si < 5 and 0 <= sj < 5:
                            acc += conv.weight[0, 0, ki, kj] * x[0, 0, si, sj]
                expected[i, j] = acc
        np.testing.assert_allclose(out[0, 0], expected, atol=1e-6)

    def test_matches_scipy_correlate(self):
        rng = np.random.default_rng(2)
        conv = L.Conv2d("c", 2, 3, (3, 5), (1, 2), rng)
        x = rng.standard_normal((2, 2, 8, 11)).astype(np.float32)
        out = conv.forward(x)
        for b in range(2):
            for o in range(3):
                acc = np.zeros((8, 11))
                for c in range(2):
                    acc += signal.correlate2d(x[b, c], conv.weight[o, c], mode="same")
                np.testing.assert_allclose(out[b, o], acc + conv.bias[o], atol=1e-4)

    def test_rectangular_kernel_shapes(self):
        rng = np.random.default_rng(3)
        conv = L.Conv2d("c", 1, 4, (4, 16), (1, 7), rng)
        out = conv.forward(np.zeros((1, 1, 128, 100), dtype=np.float32))
        assert out.shape == (1, 4, 127, 99)

    def test_gradients(self):
        rng = np.random.default_rng(4)
        conv = L.Conv2d("c", 2, 3, (3, 3), (1, 1), rng)
        x = rng.standard_normal((2, 2, 6, 7)).astype(np.float32)
        check_layer_grads(conv, x)

    def test_shape_error_names_layer(self):
        rng = np.random.default_rng(5)
        conv = L.Conv2d("conv9", 2, 3, (3, 3), (1, 1), rng)
        with pytest.raises(L.ShapeError, match="conv9"):
            conv.forward(np.zeros((1, 5, 4, 4), dtype=np.float32))


class TestMaxPool:
    def test_values(self):
        pool = L.MaxPool2x2("p")
        x = np.arange(16, dtype=np.float32).reshape(1, 1, 4, 4)
        out = pool.forward(x)
        np.testing.assert_array_equal(out[0, 0], [[5, 7], [13, 15]])

    def test_odd_dims_dropped(self):
        pool = L.MaxPool2x2("p")
        out = pool.forward(np.zeros((1, 1, 5, 7), dtype=np.float32))
        assert out.shape == (1, 1, 2, 3)

    def test_gradients(self):
        rng = np.random.default_rng(6)
        pool = L.MaxPool2x2("p")
        x = rng.standard_normal((2, 2, 6, 8)).astype(np.float32)
        check_layer_grads(pool, x)


class TestBatchNorm:
    def test_train_normalizes(self):
        bn = L.BatchNorm2d("bn", 3)
        rng = np.random.default_rng(7)
        x = rng.normal(5.0, 3.0, size=(4, 3, 6, 6)).astype(np.float32)
        out = bn.forward(x, train=True)
        np.testing.assert_allclose(out.mean(axis=(0, 2, 3)), 0.0, atol=1e-5)
        np.testing.assert_allclose(out.std(axis=(0, 2, 3)), 1.0, atol=1e-3)

    def test_running_stats_converge(self):
        bn = L.BatchNorm2d("bn", 1)
        rng = np.random.default_rng(8)
        for _ in range(300):
            bn.forward(rng.normal(2.0, 1.5, size=(8, 1, 4, 4)).astype(np.float32), train=True)
        assert abs(bn.running_mean[0] - 2.0) < 0.1
        assert abs(bn.running_var[0] - 2.25) < 0.3

    def test_inference_uses_running_stats(self):
        bn = L.BatchNorm2d("bn", 1)
        bn.running_mean[:] = 1.0
        bn.running_var[:] = 4.0
        x = np.full((1, 1, 2, 2), 3.0, dtype=np.float32)
        out = bn.forward(x, train=False)
        np.testing.assert_allclose(out, (3.0 - 1.0) / np.sqrt(4.0 + bn.eps), rtol=1e-5)

    def test_gradients_train_mode(self):
        rng = np.random.default_rng(9)
        bn = L.BatchNorm2d("bn", 2)
        bn.weight[:] = rng.uniform(0.5, 1.5, 2)
        bn.bias[:] = rng.uniform(-0.5, 0.5, 2)
        x = rng.standard_normal((3, 2, 4, 5)).astype(np.float32)
        check_layer_grads(bn, x, train=True, atol=5e-3)


class TestBiLSTM:
    def reference_lstm(self, x, d):
        """Plain per-sample, per-step reference implementation."""
        b, t, _ = x.shape
        h_size = d.hidden
        outs = np.zeros((b, t, h_size))
        for bi in range(b):
            h = np.zeros(h_size)
            c = np.zeros(h_size)
            for ti in range(t):
                raw = d.w_ih @ x[bi, ti] + d.w_hh @ h + d.b_ih + d.b_hh
                i = 1 / (1 + np.exp(-raw[:h_size]))
                f = 1 / (1 + np.exp(-raw[h_size:2 * h_size]))
                g = np.tanh(raw[2 * h_size:3 * h_size])
                o = 1 / (1 + np.exp(-raw[3 * h_size:]))
                c = f * c + i * g
                h = o * np.tanh(c)
                outs[bi, ti] = h
        return outs

    def test_forward_matches_reference(self):
        rng = np.random.default_rng(10)
        lstm = L.BiLSTM("l", 3, 4, rng)
        x = rng.standard_normal((2, 5, 3)).astype(np.float32)
        out = lstm.forward(x)
        ref_f = self.reference_lstm(x, lstm.fw)
        ref_b = self.reference_lstm(x[:, ::-1], lstm.bw)[:, ::-1]
        np.testing.assert_allclose(out[:, :, :4], ref_f, atol=1e-5)
        np.testing.assert_allclose(out[:, :, 4:], ref_b, atol=1e-5)

    def test_forget_bias_initialized_open(self):
        lstm = L.BiLSTM("l", 3, 4, np.random.default_rng(0))
        np.testing.assert_array_equal(lstm.fw.b_ih[4:8], 1.0)

    def test_gradients(self):
        rng = np.random.default_rng(11)
        lstm = L.BiLSTM("l", 3, 3, rng)
        x = rng.standard_normal((2, 4, 3)).astype(np.float32)
        check_layer_grads(lstm, x, atol=5e-3)

    def test_batch_row_matches_single_sample(self):
        # same values up to float32 BLAS blocking differences across batch shapes
        rng = np.random.default_rng(12)
        lstm = L.BiLSTM("l", 3, 4, rng)
        x = rng.standard_normal((2, 5, 3)).astype(np.float32)
        full = lstm.forward(x)
        one = lstm.forward(x[:1])
        np.testing.assert_allclose(full[:1], one, atol=1e-6)


class TestOtherLayers:
    def test_relu_gradients(self):
        rng = np.random.default_rng(13)
        x = rng.standard_normal((3, 4)).astype(np.float32) + 0.1  # keep away from the kink
        check_layer_grads(L.ReLU("r"), x)

    def test_linear_gradients(self):
        rng = np.random.default_rng(14)
        lin = L.Linear("fc", 5, 3, rng)
        x = rng.standard_normal((2, 4, 5)).astype(np.float32)
        check_layer_grads(lin, x)

    def test_logsoftmax_rows_normalized(self):
        rng = np.random.default_rng(15)
        ls = L.LogSoftmax("s")
        out = ls.forward(rng.standard_normal((3, 7, 5)).astype(np.float32) * 4)
        sums = np.exp(out).sum(axis=-1)
        np.testing.assert_allclose(sums, 1.0, atol=1e-5)

    def test_logsoftmax_gradients(self):
        rng = np.random.default_rng(16)
        x = rng.standard_normal((2, 3, 4)).astype(np.float32)
        check_layer_grads(L.LogSoftmax("s"), x)

    def test_dropout_inference_is_identity(self):
        drop = L.Dropout("d", 0.5)
        x = np.ones((4, 4), dtype=np.float32)
        np.testing.assert_array_equal(drop.forward(x, train=False), x)

    def test_dropout_preserves_expectation(self):
        drop = L.Dropout("d", 0.3)
        rng = np.random.default_rng(17)
        x = np.ones((200, 200), dtype=np.float32)
        out = drop.forward(x, train=True, rng=rng)
        assert abs(out.mean() - 1.0) < 0.02

    def test_collapse_round_trip(self):
        col = L.Collapse("c")
        rng = np.random.default_rng(18)
        x = rng.standard_normal((2, 3, 4, 5)).astype(np.float32)
        out = col.forward(x)
        assert out.shape == (2, 5, 12)
        np.testing.assert_array_equal(col.backward(out), x)

    def test_axis_lstm_shapes(self):
        rng = np.random.default_rng(19)
        for axis in ("x", "y"):
            lstm = L.AxisBiLSTM("a", 3, 5, axis, rng)
            out = lstm.forward(rng.standard_normal((2, 3, 6, 7)).astype(np.float32))
            assert out.shape == (2, 10, 6, 7)

    def test_sigmoid_range(self):
        sig = L.Sigmoid("s")
        out = sig.forward(np.array([[-50.0, 0.0, 50.0]], dtype=np.float32))
        assert (out >= 0).all() and (out <= 1).all()
        np.testing.assert_allclose(out[0, 1], 0.5)
