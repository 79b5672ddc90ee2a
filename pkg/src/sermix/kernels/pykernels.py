"""Pure-numpy implementations of the encoder hot kernels.

This module is the reference backend: the compiled core in ``_core.pyx``
implements the same functions with the same signatures and must agree with
these to float64 rounding. Shapes are per-sample: ``x`` is a (T, d) matrix of
one sequence, never a padded batch.
"""

import math

import numpy as np

LN_EPS = 1e-5

_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


def layernorm_forward(x, gain, bias):
    """Row-wise layer normalization ``y = gain * (x - mean) / std + bias``.

    Returns ``(y, mean, rstd)`` where ``mean`` and ``rstd = 1/sqrt(var+eps)``
    are the per-row statistics needed by the backward pass.
    """
    mean = x.mean(axis=1)
    rstd = 1.0 / np.sqrt(x.var(axis=1) + LN_EPS)
    xhat = (x - mean[:, None]) * rstd[:, None]
    return xhat * gain + bias, mean, rstd


def layernorm_backward(dy, x, gain, mean, rstd):
    """Gradients of layernorm_forward: returns ``(dx, dgain, dbias)``."""
    xhat = (x - mean[:, None]) * rstd[:, None]
    dgain = (dy * xhat).sum(axis=0)
    dbias = dy.sum(axis=0)
    dxhat = dy * gain
    m1 = dxhat.mean(axis=1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=1, keepdims=True)
    dx = (dxhat - m1 - xhat * m2) * rstd[:, None]
    return dx, dgain, dbias


def gelu_forward(x):
    """GELU (tanh form), chosen over relu so every gradient is smooth."""
    u = _GELU_C * (x + _GELU_A * x * x * x)
    return 0.5 * x * (1.0 + np.tanh(u))


def gelu_backward(dy, x):
    """Elementwise derivative of gelu_forward applied to ``dy``."""
    u = _GELU_C * (x + _GELU_A * x * x * x)
    t = np.tanh(u)
    du = _GELU_C * (1.0 + 3.0 * _GELU_A * x * x)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)


def softmax_rows(x):
    """Numerically stable softmax over the last axis of a 2-D array."""
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def attention_forward(q, k, v, n_heads):
    """Multi-head scaled dot-product self-attention over one sequence.

    ``q``, ``k``, ``v`` are (T, d) with d split evenly across heads. Returns
    ``(out, attn)`` where ``attn`` is the (n_heads, T, T) row-stochastic
    weight tensor kept for the backward pass.
    """
    t, d = q.shape
    dh = d // n_heads
    scale = 1.0 / math.sqrt(dh)
    out = np.empty_like(q)
    attn = np.empty((n_heads, t, t))
    for h in range(n_heads):
        cols = slice(h * dh, (h + 1) * dh)
        scores = (q[:, cols] @ k[:, cols].T) * scale
        a = softmax_rows(scores)
        attn[h] = a
        out[:, cols] = a @ v[:, cols]
    return out, attn


def attention_backward(dout, q, k, v, attn, n_heads):
    """Gradients of attention_forward: returns ``(dq, dk, dv)``."""
    t, d = q.shape
    dh = d // n_heads
    scale = 1.0 / math.sqrt(dh)
    dq = np.empty_like(q)
    dk = np.empty_like(k)
    dv = np.empty_like(v)
    for h in range(n_heads):
        cols = slice(h * dh, (h + 1) * dh)
        a = attn[h]
        da = dout[:, cols] @ v[:, cols].T
        dv[:, cols] = a.T @ dout[:, cols]
        ds = a * (da - (da * a).sum(axis=1, keepdims=True))
        dq[:, cols] = (ds @ k[:, cols]) * scale
        dk[:, cols] = (ds.T @ q[:, cols]) * scale
    return dq, dk, dv
