"""Self-attention feature extractor with explicit analytic backpropagation.

The encoder is a stack of pre-norm residual blocks: multi-head self-attention
followed by its output projection, a dropout on that projection (the only
dropout in the model, active in train mode only), then a position-wise
feed-forward block. Learned absolute positional embeddings are added after
the input projection. There is deliberately no layer norm after the stack, so
an empty stack (n_layers=0) passes the embedded input straight through to the
reduction.

The utterance representation is either the first encoder output vector or the
average over time, projected through a small head: pooled -> gelu projection
(the embedding the center loss acts on) -> linear class logits -> softmax.

Gradients are derived by hand and verified against central finite differences
by the gradcheck harness; no autodiff is involved anywhere.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .data import SoftLabel
from .errors import NumericError, ValidationError

REDUCTIONS = ("first_vector", "average_pool")

CHECKPOINT_MAGIC = b"SMXCKPT\0"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class StridedFrontend:
    """Optional strided linear frontend approximating temporal downsampling:
    windows of ``kernel`` frames, advanced by ``stride``, are flattened and
    projected together."""

    kernel: int
    stride: int

    def __post_init__(self):
        if self.kernel < 1 or self.stride < 1:
            raise ValidationError(f"frontend kernel and stride must be >= 1, got {self}")


@dataclass(frozen=True)
class ModelConfig:
    d_in: int
    d_model: int = 32
    n_layers: int = 2
    n_heads: int = 4
    d_ff: int = 64
    d_proj: int = 16
    n_classes: int = 4
    projection_dropout: float = 0.4
    reduction: str = "first_vector"
    conv_frontend: StridedFrontend | None = None
    max_len: int = 512

    def __post_init__(self):
        for name in ("d_in", "d_model", "n_heads", "d_ff", "d_proj", "n_classes", "max_len"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.n_layers < 0:
            raise ValidationError(f"n_layers must be >= 0, got {self.n_layers}")
        if self.d_model % self.n_heads != 0:
            raise ValidationError(f"d_model ({self.d_model}) must be divisible by n_heads ({self.n_heads})")
        if not 0.0 <= self.projection_dropout < 1.0:
            raise ValidationError(f"projection_dropout must lie in [0, 1), got {self.projection_dropout!r}")
        if self.reduction not in REDUCTIONS:
            raise ValidationError(f"reduction must be one of {REDUCTIONS}, got {self.reduction!r}")

    @property
    def d_in_eff(self) -> int:
        """Input width of the first projection (frontend windows flattened)."""
        if self.conv_frontend is None:
            return self.d_in
        return self.d_in * self.conv_frontend.kernel


@dataclass(frozen=True, eq=False)
class FeatureSequence:
    """Encoder output: one feature vector per (possibly downsampled) frame."""

    frames: np.ndarray


@dataclass(frozen=True, eq=False)
class PooledFeature:
    """The utterance embedding entering the center loss (``vec``) and the
    reduction it was projected from (``pre_proj``)."""

    vec: np.ndarray
    pre_proj: np.ndarray


@dataclass(frozen=True, eq=False)
class Prediction:
    logits: np.ndarray
    probs: SoftLabel


def _block_param_names(i: int) -> dict[str, str]:
    p = f"block{i}."
    return {
        "ln1_g": p + "ln1.g", "ln1_b": p + "ln1.b",
        "wq": p + "attn.wq", "bq": p + "attn.bq",
        "wk": p + "attn.wk", "bk": p + "attn.bk",
        "wv": p + "attn.wv", "bv": p + "attn.bv",
        "wo": p + "attn.wo", "bo": p + "attn.bo",
        "ln2_g": p + "ln2.g", "ln2_b": p + "ln2.b",
        "w1": p + "ff.w1", "b1": p + "ff.b1",
        "w2": p + "ff.w2", "b2": p + "ff.b2",
    }


def init_params(config: ModelConfig, seed: int) -> dict[str, np.ndarray]:
    """Scaled-uniform weights (bound sqrt(6/(fan_in+fan_out)) per matrix),
    zero biases, unit layernorm gains; deterministic per seed."""
    rng = np.random.default_rng(seed)

    def uniform(shape):
        bound = np.sqrt(6.0 / (shape[0] + shape[1]))
        return rng.uniform(-bound, bound, size=shape)

    d = config.d_model
    params: dict[str, np.ndarray] = {}
    params["frontend.w"] = uniform((config.d_in_eff, d))
    params["frontend.b"] = np.zeros(d)
    params["pos"] = uniform((config.max_len, d))
    for i in range(config.n_layers):
        n = _block_param_names(i)
        params[n["ln1_g"]] = np.ones(d)
        params[n["ln1_b"]] = np.zeros(d)
        for w, b in (("wq", "bq"), ("wk", "bk"), ("wv", "bv"), ("wo", "bo")):
            params[n[w]] = uniform((d, d))
            params[n[b]] = np.zeros(d)
        params[n["ln2_g"]] = np.ones(d)
        params[n["ln2_b"]] = np.zeros(d)
        params[n["w1"]] = uniform((d, config.d_ff))
        params[n["b1"]] = np.zeros(config.d_ff)
        params[n["w2"]] = uniform((config.d_ff, d))
        params[n["b2"]] = np.zeros(d)
    params["proj.w0"] = uniform((d, config.d_proj))
    params["proj.b0"] = np.zeros(config.d_proj)
    params["head.w1"] = uniform((config.d_proj, config.n_classes))
    params["head.b1"] = np.zeros(config.n_classes)
    return params


def count_params(config: ModelConfig) -> int:
    """Closed-form size of the parameter set returned by init_params."""
    d = config.d_model
    frontend = config.d_in_eff * d + d
    pos = config.max_len * d
    per_block = (
        2 * d                      # ln1
        + 4 * (d * d + d)          # q, k, v, out projections
        + 2 * d                    # ln2
        + d * config.d_ff + config.d_ff
        + config.d_ff * d + d
    )
    head = d * config.d_proj + config.d_proj + config.d_proj * config.n_classes + config.n_classes
    return frontend + pos + config.n_layers * per_block + head


def _frontend_windows(config: ModelConfig, x: np.ndarray) -> np.ndarray:
    if config.conv_frontend is None:
        return x
    k, s = config.conv_frontend.kernel, config.conv_frontend.stride
    t = x.shape[0]
    if t < k:
        raise ValidationError(f"signal length {t} shorter than frontend kernel {k}")
    n = (t - k) // s + 1
    out = np.empty((n, k * x.shape[1]))
    for i in range(n):
        out[i] = x[i * s : i * s + k].reshape(-1)
    return out


def _forward(config, params, signal, train_mode=False, dropout_rng=None):
    """Forward pass keeping every intermediate needed by backward()."""
    with np.errstate(invalid="ignore", over="ignore"):
        return _forward_impl(config, params, signal, train_mode, dropout_rng)


def _forward_impl(config, params, signal, train_mode, dropout_rng):
    # Non-finite values are detected by the explicit checks below, which
    # name the failing layer; the raw numpy warnings are silenced above.
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValidationError(f"signal must be a non-empty (length, d_in) array, got shape {x.shape}")
    if x.shape[1] != config.d_in:
        raise ValidationError(f"signal frame dimension {x.shape[1]} != configured d_in {config.d_in}")
    if not np.isfinite(x).all():
        raise ValidationError("signal contains non-finite values")

    xin = _frontend_windows(config, x)
    t = xin.shape[0]
    if t > config.max_len:
        raise ValidationError(f"sequence length {t} exceeds max_len {config.max_len}")

    p_drop = config.projection_dropout if train_mode else 0.0
    if p_drop > 0.0 and dropout_rng is None:
        raise ValidationError("dropout_rng is required in train mode when projection_dropout > 0")

    h = xin @ params["frontend.w"] + params["frontend.b"] + params["pos"][:t]
    cache = {"xin": xin, "t": t, "p_drop": p_drop, "blocks": []}
    for i in range(config.n_layers):
        n = _block_param_names(i)
        h0 = h
        n1, m1, r1 = kernels.layernorm_forward(h0, params[n["ln1_g"]], params[n["ln1_b"]])
        q = n1 @ params[n["wq"]] + params[n["bq"]]
        k_ = n1 @ params[n["wk"]] + params[n["bk"]]
        v = n1 @ params[n["wv"]] + params[n["bv"]]
        attn_out, attn = kernels.attention_forward(q, k_, v, config.n_heads)
        proj = attn_out @ params[n["wo"]] + params[n["bo"]]
        if p_drop > 0.0:
            mask = dropout_rng.random(proj.shape) >= p_drop
            dropped = proj * mask / (1.0 - p_drop)
        else:
            mask = None
            dropped = proj
        h1 = h0 + dropped
        n2, m2, r2 = kernels.layernorm_forward(h1, params[n["ln2_g"]], params[n["ln2_b"]])
        u = n2 @ params[n["w1"]] + params[n["b1"]]
        g = kernels.gelu_forward(u)
        f = g @ params[n["w2"]] + params[n["b2"]]
        h = h1 + f
        if not np.isfinite(h).all():
            raise NumericError(f"non-finite activations leaving block{i}")
        cache["blocks"].append(
            {"h0": h0, "n1": n1, "m1": m1, "r1": r1, "q": q, "k": k_, "v": v,
             "attn": attn, "attn_out": attn_out, "mask": mask,
             "h1": h1, "n2": n2, "m2": m2, "r2": r2, "u": u, "g": g}
        )

    if config.reduction == "first_vector":
        pre = h[0].copy()
    else:
        pre = h.mean(axis=0)
    a0 = pre @ params["proj.w0"] + params["proj.b0"]
    vec = kernels.gelu_forward(a0)
    logits = vec @ params["head.w1"] + params["head.b1"]
    if not np.isfinite(logits).all():
        raise NumericError("non-finite activations in the projection head")
    probs = kernels.softmax_rows(logits[None, :])[0]
    cache.update(h_out=h, pre=pre, a0=a0, vec=vec, logits=logits, probs=probs)
    return cache


def forward(config, params, signal, train_mode=False, dropout_rng=None):
    """Run the model on one signal.

    Returns ``(FeatureSequence, PooledFeature, Prediction)``. With train_mode
    off the output is deterministic; with train_mode on and a positive
    projection_dropout, ``dropout_rng`` drives the dropout masks.
    """
    cache = _forward(config, params, signal, train_mode, dropout_rng)
    return (
        FeatureSequence(cache["h_out"]),
        PooledFeature(vec=cache["vec"], pre_proj=cache["pre"]),
        Prediction(logits=cache["logits"], probs=SoftLabel(cache["probs"])),
    )


def backward(config, params, cache, d_logits, d_vec=None):
    """Gradients of a scalar loss with respect to every parameter.

    ``d_logits`` is the loss gradient at the class logits; ``d_vec``
    optionally injects an extra gradient at the projection embedding (the
    center-loss path). Returns a dict keyed exactly like the parameter set.
    """
    grads = {name: np.zeros_like(p) for name, p in params.items()}
    t = cache["t"]
    p_drop = cache["p_drop"]

    d_logits = np.asarray(d_logits, dtype=np.float64)
    grads["head.w1"] += np.outer(cache["vec"], d_logits)
    grads["head.b1"] += d_logits
    dvec = params["head.w1"] @ d_logits
    if d_vec is not None:
        dvec = dvec + d_vec
    da0 = kernels.gelu_backward(dvec, cache["a0"])
    grads["proj.w0"] += np.outer(cache["pre"], da0)
    grads["proj.b0"] += da0
    dpre = params["proj.w0"] @ da0

    dh = np.zeros((t, config.d_model))
    if config.reduction == "first_vector":
        dh[0] = dpre
    else:
        dh += dpre / t

    for i in reversed(range(config.n_layers)):
        n = _block_param_names(i)
        blk = cache["blocks"][i]
        # feed-forward sublayer: h = h1 + f
        df = dh
        dg = df @ params[n["w2"]].T
        grads[n["w2"]] += blk["g"].T @ df
        grads[n["b2"]] += df.sum(axis=0)
        du = kernels.gelu_backward(dg, blk["u"])
        dn2 = du @ params[n["w1"]].T
        grads[n["w1"]] += blk["n2"].T @ du
        grads[n["b1"]] += du.sum(axis=0)
        dh1_ln, dg2, db2 = kernels.layernorm_backward(dn2, blk["h1"], params[n["ln2_g"]], blk["m2"], blk["r2"])
        grads[n["ln2_g"]] += dg2
        grads[n["ln2_b"]] += db2
        dh1 = dh + dh1_ln
        # attention sublayer: h1 = h0 + dropout(attn_out @ wo + bo)
        if blk["mask"] is not None:
            dproj = dh1 * blk["mask"] / (1.0 - p_drop)
        else:
            dproj = dh1
        dattn_out = dproj @ params[n["wo"]].T
        grads[n["wo"]] += blk["attn_out"].T @ dproj
        grads[n["bo"]] += dproj.sum(axis=0)
        dq, dk, dv = kernels.attention_backward(dattn_out, blk["q"], blk["k"], blk["v"], blk["attn"], config.n_heads)
        dn1 = dq @ params[n["wq"]].T + dk @ params[n["wk"]].T + dv @ params[n["wv"]].T
        grads[n["wq"]] += blk["n1"].T @ dq
        grads[n["bq"]] += dq.sum(axis=0)
        grads[n["wk"]] += blk["n1"].T @ dk
        grads[n["bk"]] += dk.sum(axis=0)
        grads[n["wv"]] += blk["n1"].T @ dv
        grads[n["bv"]] += dv.sum(axis=0)
        dh0_ln, dg1, db1 = kernels.layernorm_backward(dn1, blk["h0"], params[n["ln1_g"]], blk["m1"], blk["r1"])
        grads[n["ln1_g"]] += dg1
        grads[n["ln1_b"]] += db1
        dh = dh1 + dh0_ln

    grads["pos"][:t] += dh
    grads["frontend.w"] += cache["xin"].T @ dh
    grads["frontend.b"] += dh.sum(axis=0)
    return grads


def save_params(path, params: dict[str, np.ndarray]) -> None:
    """Write a checkpoint: magic, version, then named float64 tensors."""
    chunks = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(params))]
    for name, tensor in params.items():
        data = np.ascontiguousarray(tensor, dtype="<f8")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", data.ndim))
        chunks.append(struct.pack(f"<{data.ndim}I", *data.shape))
        chunks.append(data.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_params(path) -> dict[str, np.ndarray]:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:8] != CHECKPOINT_MAGIC:
        raise ValidationError(f"{path}: not a parameter checkpoint")
    version, count = struct.unpack("<II", raw[8:16])
    if version != CHECKPOINT_VERSION:
        raise ValidationError(f"{path}: unsupported checkpoint version {version}")
    offset = 16
    params: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", raw, offset)
        offset += 2
        name = raw[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", raw, offset)
        offset += 1
        shape = struct.unpack_from(f"<{ndim}I", raw, offset)
        offset += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        tensor = np.frombuffer(raw, dtype="<f8", count=size, offset=offset).reshape(shape)
        offset += 8 * size
        params[name] = tensor.copy()
    if offset != len(raw):
        raise ValidationError(f"{path}: trailing bytes after last tensor")
    return params
