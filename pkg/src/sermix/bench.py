"""Micro-benchmark comparing the compiled kernel core with the numpy fallback.

Times the individual hot kernels on representative per-sample shapes, plus a
full encoder forward+backward, for every available backend:

    python -m sermix.bench [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from . import kernels
from . import model as model_mod


def _time(fn, repeats: int) -> float:
    fn()  # warm up
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def _kernel_cases(rng, t: int, d_model: int, d_ff: int, n_heads: int):
    x = rng.standard_normal((t, d_model))
    gain = rng.standard_normal(d_model)
    bias = rng.standard_normal(d_model)
    dy = rng.standard_normal((t, d_model))
    q, k, v = (rng.standard_normal((t, d_model)) for _ in range(3))
    u = rng.standard_normal((t, d_ff))
    du = rng.standard_normal((t, d_ff))
    _, mean, rstd = kernels.layernorm_forward(x, gain, bias)
    _, attn = kernels.attention_forward(q, k, v, n_heads)
    return {
        "layernorm fwd": lambda: kernels.layernorm_forward(x, gain, bias),
        "layernorm bwd": lambda: kernels.layernorm_backward(dy, x, gain, mean, rstd),
        "gelu fwd": lambda: kernels.gelu_forward(u),
        "gelu bwd": lambda: kernels.gelu_backward(du, u),
        "attention fwd": lambda: kernels.attention_forward(q, k, v, n_heads),
        "attention bwd": lambda: kernels.attention_backward(dy, q, k, v, attn, n_heads),
    }


def _model_case(rng, t: int):
    config = model_mod.ModelConfig(d_in=8, d_model=32, n_layers=2, n_heads=4, d_ff=64,
                                   d_proj=16, projection_dropout=0.0, max_len=max(t, 8))
    params = model_mod.init_params(config, seed=0)
    signal = rng.standard_normal((t, config.d_in))
    d_logits = rng.standard_normal(config.n_classes)

    def run():
        cache = model_mod._forward(config, params, signal, False, None)
        model_mod.backward(config, params, cache, d_logits)

    return run


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=200)
    parser.add_argument("--lengths", type=int, nargs="+", default=[32, 128])
    args = parser.parse_args(argv)

    backends = kernels.available_backends()
    if "c" not in backends:
        print("note: compiled core not built; timing the numpy fallback only")

    rng = np.random.default_rng(0)
    rows = []
    for t in args.lengths:
        cases = dict(_kernel_cases(rng, t, d_model=32, d_ff=64, n_heads=4))
        cases["model fwd+bwd"] = _model_case(rng, t)
        for name, fn in cases.items():
            timings = {}
            for backend in backends:
                with kernels.use_backend(backend):
                    timings[backend] = _time(fn, args.repeats)
            rows.append((f"{name} (T={t})", timings))

    width = max(len(r[0]) for r in rows)
    header = f"{'kernel':<{width}}  " + "  ".join(f"{b:>10}" for b in backends)
    if len(backends) > 1:
        header += f"  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, timings in rows:
        line = f"{name:<{width}}  " + "  ".join(f"{timings[b] * 1e6:>8.1f}us" for b in backends)
        if len(backends) > 1:
            line += f"  {timings['py'] / timings['c']:>7.2f}x"
        print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
