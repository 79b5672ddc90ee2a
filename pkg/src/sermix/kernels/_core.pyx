# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the encoder hot kernels.

Mirrors ``pykernels`` function for function; agreement is enforced by the
backend-equivalence tests. All arrays are C-contiguous float64.
"""

import numpy as np

from libc.math cimport exp, sqrt, tanh

cdef double LN_EPS = 1e-5
cdef double GELU_C = 0.7978845608028654  # sqrt(2/pi)
cdef double GELU_A = 0.044715


def layernorm_forward(const double[:, ::1] x, const double[::1] gain, const double[::1] bias):
    cdef Py_ssize_t t = x.shape[0], d = x.shape[1], i, j
    y_arr = np.empty((t, d))
    mean_arr = np.empty(t)
    rstd_arr = np.empty(t)
    cdef double[:, ::1] y = y_arr
    cdef double[::1] mean = mean_arr, rstd = rstd_arr
    cdef double s, var, m, r, c
    for i in range(t):
        s = 0.0
        for j in range(d):
            s += x[i, j]
        m = s / d
        var = 0.0
        for j in range(d):
            c = x[i, j] - m
            var += c * c
        var /= d
        r = 1.0 / sqrt(var + LN_EPS)
        mean[i] = m
        rstd[i] = r
        for j in range(d):
            y[i, j] = (x[i, j] - m) * r * gain[j] + bias[j]
    return y_arr, mean_arr, rstd_arr


def layernorm_backward(const double[:, ::1] dy, const double[:, ::1] x,
                       const double[::1] gain, const double[::1] mean,
                       const double[::1] rstd):
    cdef Py_ssize_t t = x.shape[0], d = x.shape[1], i, j
    dx_arr = np.empty((t, d))
    dgain_arr = np.zeros(d)
    dbias_arr = np.zeros(d)
    cdef double[:, ::1] dx = dx_arr
    cdef double[::1] dgain = dgain_arr, dbias = dbias_arr
    cdef double m1, m2, xh, dxh, m, r
    for i in range(t):
        m = mean[i]
        r = rstd[i]
        m1 = 0.0
        m2 = 0.0
        for j in range(d):
            xh = (x[i, j] - m) * r
            dxh = dy[i, j] * gain[j]
            dgain[j] += dy[i, j] * xh
            dbias[j] += dy[i, j]
            m1 += dxh
            m2 += dxh * xh
        m1 /= d
        m2 /= d
        for j in range(d):
            xh = (x[i, j] - m) * r
            dxh = dy[i, j] * gain[j]
            dx[i, j] = (dxh - m1 - xh * m2) * r
    return dx_arr, dgain_arr, dbias_arr


def gelu_forward(const double[::1] x):
    cdef Py_ssize_t n = x.shape[0], i
    y_arr = np.empty(n)
    cdef double[::1] y = y_arr
    cdef double u, xi
    for i in range(n):
        xi = x[i]
        u = GELU_C * (xi + GELU_A * xi * xi * xi)
        y[i] = 0.5 * xi * (1.0 + tanh(u))
    return y_arr


def gelu_backward(const double[::1] dy, const double[::1] x):
    cdef Py_ssize_t n = x.shape[0], i
    dx_arr = np.empty(n)
    cdef double[::1] dx = dx_arr
    cdef double u, t, du, xi
    for i in range(n):
        xi = x[i]
        u = GELU_C * (xi + GELU_A * xi * xi * xi)
        t = tanh(u)
        du = GELU_C * (1.0 + 3.0 * GELU_A * xi * xi)
        dx[i] = dy[i] * (0.5 * (1.0 + t) + 0.5 * xi * (1.0 - t * t) * du)
    return dx_arr


def softmax_rows(const double[:, ::1] x):
    cdef Py_ssize_t t = x.shape[0], d = x.shape[1], i, j
    y_arr = np.empty((t, d))
    cdef double[:, ::1] y = y_arr
    cdef double mx, s
    for i in range(t):
        mx = x[i, 0]
        for j in range(1, d):
            if x[i, j] > mx:
                mx = x[i, j]
        s = 0.0
        for j in range(d):
            y[i, j] = exp(x[i, j] - mx)
            s += y[i, j]
        for j in range(d):
            y[i, j] /= s
    return y_arr


def attention_forward(const double[:, ::1] q, const double[:, ::1] k,
                      const double[:, ::1] v, int n_heads):
    cdef Py_ssize_t t = q.shape[0], d = q.shape[1]
    cdef Py_ssize_t dh = d // n_heads
    cdef Py_ssize_t h, i, j, c, o
    cdef double scale = 1.0 / sqrt(<double> dh)
    out_arr = np.empty((t, d))
    attn_arr = np.empty((n_heads, t, t))
    cdef double[:, ::1] out = out_arr
    cdef double[:, :, ::1] attn = attn_arr
    cdef double s, mx, acc
    for h in range(n_heads):
        o = h * dh
        for i in range(t):
            for j in range(t):
                s = 0.0
                for c in range(dh):
                    s += q[i, o + c] * k[j, o + c]
                attn[h, i, j] = s * scale
            mx = attn[h, i, 0]
            for j in range(1, t):
                if attn[h, i, j] > mx:
                    mx = attn[h, i, j]
            s = 0.0
            for j in range(t):
                attn[h, i, j] = exp(attn[h, i, j] - mx)
                s += attn[h, i, j]
            for j in range(t):
                attn[h, i, j] /= s
            for c in range(dh):
                acc = 0.0
                for j in range(t):
                    acc += attn[h, i, j] * v[j, o + c]
                out[i, o + c] = acc
    return out_arr, attn_arr


def attention_backward(const double[:, ::1] dout, const double[:, ::1] q,
                       const double[:, ::1] k, const double[:, ::1] v,
                       const double[:, :, ::1] attn, int n_heads):
    cdef Py_ssize_t t = q.shape[0], d = q.shape[1]
    cdef Py_ssize_t dh = d // n_heads
    cdef Py_ssize_t h, i, j, c, o
    cdef double scale = 1.0 / sqrt(<double> dh)
    dq_arr = np.zeros((t, d))
    dk_arr = np.zeros((t, d))
    dv_arr = np.zeros((t, d))
    da_arr = np.empty(t)
    cdef double[:, ::1] dq = dq_arr, dk = dk_arr, dv = dv_arr
    cdef double[::1] da = da_arr
    cdef double row_dot, s, ds
    for h in range(n_heads):
        o = h * dh
        for i in range(t):
            row_dot = 0.0
            for j in range(t):
                s = 0.0
                for c in range(dh):
                    s += dout[i, o + c] * v[j, o + c]
                da[j] = s
                row_dot += s * attn[h, i, j]
            for j in range(t):
                ds = attn[h, i, j] * (da[j] - row_dot)
                for c in range(dh):
                    dq[i, o + c] += ds * k[j, o + c] * scale
                    dk[j, o + c] += ds * q[i, o + c] * scale
                    dv[j, o + c] += attn[h, i, j] * dout[i, o + c]
    return dq_arr, dk_arr, dv_arr
