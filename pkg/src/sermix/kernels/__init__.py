"""Hot-path kernels with a compiled core and a pure-numpy fallback.

The backend is picked once at import time: the Cython extension ``_core`` is
used when built, otherwise the numpy fallback in ``pykernels``. Set
``SERMIX_KERNELS=py`` to force the fallback, or ``SERMIX_KERNELS=c`` to make a
missing extension a hard error instead of a silent fallback. Benchmarks and
equivalence tests can switch backends for a block via :func:`use_backend`.
"""

import os
from contextlib import contextmanager

import numpy as np

from . import pykernels

LN_EPS = pykernels.LN_EPS

_BACKENDS = {"py": pykernels}
try:
    from . import _core

    _BACKENDS["c"] = _core
except ImportError:
    _core = None

_requested = os.environ.get("SERMIX_KERNELS", "auto")
if _requested == "auto":
    _active = "c" if "c" in _BACKENDS else "py"
elif _requested in _BACKENDS:
    _active = _requested
elif _requested == "c":
    raise ImportError(
        "SERMIX_KERNELS=c requested but the compiled kernel core is not built; "
        "run `python setup.py build_ext --inplace` or reinstall the package"
    )
else:
    raise ValueError(f"SERMIX_KERNELS must be 'auto', 'c' or 'py', got {_requested!r}")


def active_backend():
    """Name of the backend currently in use ('c' or 'py')."""
    return _active


def available_backends():
    return sorted(_BACKENDS)


def get_backend(name):
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown kernel backend {name!r}; available: {available_backends()}") from None


@contextmanager
def use_backend(name):
    """Temporarily route all kernel calls through the named backend."""
    global _active
    get_backend(name)
    previous = _active
    _active = name
    try:
        yield
    finally:
        _active = previous


def _c2(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def layernorm_forward(x, gain, bias):
    return _BACKENDS[_active].layernorm_forward(_c2(x), _c2(gain), _c2(bias))


def layernorm_backward(dy, x, gain, mean, rstd):
    return _BACKENDS[_active].layernorm_backward(_c2(dy), _c2(x), _c2(gain), _c2(mean), _c2(rstd))


def gelu_forward(x):
    x = _c2(x)
    return _BACKENDS[_active].gelu_forward(x.reshape(-1)).reshape(x.shape)


def gelu_backward(dy, x):
    x = _c2(x)
    dy = _c2(dy)
    return _BACKENDS[_active].gelu_backward(dy.reshape(-1), x.reshape(-1)).reshape(x.shape)


def softmax_rows(x):
    return _BACKENDS[_active].softmax_rows(_c2(x))


def attention_forward(q, k, v, n_heads):
    return _BACKENDS[_active].attention_forward(_c2(q), _c2(k), _c2(v), n_heads)


def attention_backward(dout, q, k, v, attn, n_heads):
    return _BACKENDS[_active].attention_backward(
        _c2(dout), _c2(q), _c2(k), _c2(v), _c2(attn), n_heads
    )
