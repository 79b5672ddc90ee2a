"""Kernel correctness: finite-difference checks of each backward pass, a
naive reference for attention, and compiled-vs-numpy backend equivalence."""

import numpy as np
import pytest

from sermix import kernels


def central_diff(fn, x, step=1e-6):
    grad = np.empty_like(x)
    flat = x.reshape(-1)
    g = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = fn()
        flat[i] = orig - step
        down = fn()
        flat[i] = orig
        g[i] = (up - down) / (2 * step)
    return grad


class TestLayernorm:
    def test_forward_matches_direct_computation(self, rng):
        x = rng.standard_normal((5, 8))
        gain = rng.standard_normal(8)
        bias = rng.standard_normal(8)
        y, mean, rstd = kernels.layernorm_forward(x, gain, bias)
        expected = (x - x.mean(1, keepdims=True)) / np.sqrt(x.var(1, keepdims=True) + kernels.LN_EPS)
        np.testing.assert_allclose(y, expected * gain + bias, rtol=1e-12)
        assert y.shape == x.shape and mean.shape == (5,) and rstd.shape == (5,)

    def test_backward_matches_finite_differences(self, rng):
        x = rng.standard_normal((4, 6))
        gain = rng.standard_normal(6)
        bias = rng.standard_normal(6)
        w = rng.standard_normal((4, 6))  # random projection makes the loss scalar

        def loss():
            y, _, _ = kernels.layernorm_forward(x, gain, bias)
            return float((y * w).sum())

        _, mean, rstd = kernels.layernorm_forward(x, gain, bias)
        dx, dgain, dbias = kernels.layernorm_backward(w, x, gain, mean, rstd)
        np.testing.assert_allclose(dx, central_diff(loss, x), rtol=1e-6, atol=1e-8)
        np.testing.assert_allclose(dgain, central_diff(loss, gain), rtol=1e-6, atol=1e-8)
        np.testing.assert_allclose(dbias, central_diff(loss, bias), rtol=1e-6, atol=1e-8)


class TestGelu:
    def test_limits(self):
        x = np.array([-20.0, 0.0, 20.0])
        y = kernels.gelu_forward(x)
        np.testing.assert_allclose(y, [0.0, 0.0, 20.0], atol=1e-8)

    def test_backward_matches_finite_differences(self, rng):
        x = rng.standard_normal(40) * 2
        w = rng.standard_normal(40)

        def loss():
            return float((kernels.gelu_forward(x) * w).sum())

        dx = kernels.gelu_backward(w, x)
        np.testing.assert_allclose(dx, central_diff(loss, x), rtol=1e-6, atol=1e-8)


class TestSoftmaxRows:
    def test_rows_sum_to_one(self, rng):
        x = rng.standard_normal((6, 5)) * 3
        y = kernels.softmax_rows(x)
        np.testing.assert_allclose(y.sum(axis=1), 1.0, atol=1e-12)
        assert (y > 0).all()

    def test_shift_invariance(self, rng):
        x = rng.standard_normal((3, 4))
        np.testing.assert_allclose(kernels.softmax_rows(x), kernels.softmax_rows(x + 100.0), atol=1e-9)


def naive_attention(q, k, v, n_heads):
    """Direct loop reference independent of the kernel implementations."""
    t, d = q.shape
    dh = d // n_heads
    out = np.zeros((t, d))
    for h in range(n_heads):
        cols = range(h * dh, (h + 1) * dh)
        for i in range(t):
            scores = np.array([
                sum(q[i, c] * k[j, c] for c in cols) / np.sqrt(dh) for j in range(t)
            ])
            weights = np.exp(scores - scores.max())
            weights /= weights.sum()
            for c in cols:
                out[i, c] = sum(weights[j] * v[j, c] for j in range(t))
    return out


class TestAttention:
    def test_matches_naive_reference(self, rng):
        q, k, v = (rng.standard_normal((5, 6)) for _ in range(3))
        out, attn = kernels.attention_forward(q, k, v, 3)
        np.testing.assert_allclose(out, naive_attention(q, k, v, 3), rtol=1e-12)
        np.testing.assert_allclose(attn.sum(axis=2), 1.0, atol=1e-12)

    def test_backward_matches_finite_differences(self, rng):
        q, k, v = (rng.standard_normal((4, 6)) for _ in range(3))
        w = rng.standard_normal((4, 6))

        def loss():
            out, _ = kernels.attention_forward(q, k, v, 2)
            return float((out * w).sum())

        _, attn = kernels.attention_forward(q, k, v, 2)
        dq, dk, dv = kernels.attention_backward(w, q, k, v, attn, 2)
        np.testing.assert_allclose(dq, central_diff(loss, q), rtol=1e-5, atol=1e-8)
        np.testing.assert_allclose(dk, central_diff(loss, k), rtol=1e-5, atol=1e-8)
        np.testing.assert_allclose(dv, central_diff(loss, v), rtol=1e-5, atol=1e-8)


@pytest.mark.skipif("c" not in kernels.available_backends(), reason="compiled core not built")
class TestBackendEquivalence:
    def test_all_kernels_agree(self, rng):
        x = rng.standard_normal((7, 8))
        gain = rng.standard_normal(8)
        bias = rng.standard_normal(8)
        dy = rng.standard_normal((7, 8))
        q, k, v = (rng.standard_normal((7, 8)) for _ in range(3))

        def run_all():
            y, mean, rstd = kernels.layernorm_forward(x, gain, bias)
            out, attn = kernels.attention_forward(q, k, v, 4)
            return [
                y, mean, rstd,
                *kernels.layernorm_backward(dy, x, gain, mean, rstd),
                kernels.gelu_forward(x),
                kernels.gelu_backward(dy, x),
                kernels.softmax_rows(x),
                out, attn,
                *kernels.attention_backward(dy, q, k, v, attn, 4),
            ]

        with kernels.use_backend("py"):
            expected = run_all()
        with kernels.use_backend("c"):
            actual = run_all()
        for e, a in zip(expected, actual):
            np.testing.assert_allclose(a, e, rtol=1e-12, atol=1e-13)

    def test_use_backend_restores_active(self):
        before = kernels.active_backend()
        with kernels.use_backend("py"):
            assert kernels.active_backend() == "py"
        assert kernels.active_backend() == before

    def test_unknown_backend_rejected(self):
        with pytest.raises(ValueError):
            kernels.get_backend("fortran")
