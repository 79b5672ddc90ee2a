"""Pairwise mixing of variable-length signals and their labels.

Two label rules are provided: the conventional convex combination with the
mixing coefficient itself, and a length-adaptive rule that weights each
source label by (coefficient * its length), so the longer clip dominates the
mixed label. Signals are always mixed frame-wise after zero-padding the
shorter one at its tail.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SoftLabel, SpeechSample, probs_of
from .errors import ValidationError

MIXUP_MODES = ("conventional", "label_adaptive", "off")


@dataclass(frozen=True)
class MixupPolicy:
    """How to mix a batch: mode, Beta parameter (conventional mode only) and
    the fixed coefficient used in label-adaptive mode (default 0.5)."""

    mode: str = "label_adaptive"
    alpha: float = 1.0
    lambda_fixed: float = 0.5

    def __post_init__(self):
        if self.mode not in MIXUP_MODES:
            raise ValidationError(f"mode must be one of {MIXUP_MODES}, got {self.mode!r}")
        if not self.alpha > 0:
            raise ValidationError(f"alpha must be > 0, got {self.alpha!r}")
        if not 0.0 <= self.lambda_fixed <= 1.0:
            raise ValidationError(f"lambda_fixed must lie in [0, 1], got {self.lambda_fixed!r}")


@dataclass(frozen=True, eq=False)
class MixedSample:
    """A mixed signal with its soft label and the lengths it came from."""

    signal: np.ndarray
    length: int
    label: SoftLabel
    source_lengths: tuple[int, int]
    lambda_used: float

    def __post_init__(self):
        sig = np.ascontiguousarray(np.asarray(self.signal, dtype=np.float64))
        sig.flags.writeable = False
        object.__setattr__(self, "signal", sig)
        if self.length != sig.shape[0]:
            raise ValidationError(f"length {self.length} != frame count {sig.shape[0]}")
        if not 0.0 <= self.lambda_used <= 1.0:
            raise ValidationError(f"lambda_used must lie in [0, 1], got {self.lambda_used!r}")


def _as_frames(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValidationError(f"expected a (length, d_in) frame sequence, got shape {arr.shape}")
    return arr


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"mixing coefficient must lie in [0, 1], got {lam!r}")
    return lam


def mix_signals(x_i, x_j, lam: float) -> np.ndarray:
    """Frame-wise convex combination; the shorter input is zero-padded at the
    tail so the output has length max(l_i, l_j)."""
    a = _as_frames(x_i)
    b = _as_frames(x_j)
    if a.shape[1] != b.shape[1]:
        raise ValidationError(f"frame dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    lam = _check_lambda(lam)
    t = max(a.shape[0], b.shape[0])
    if a.shape[0] < t:
        a = np.vstack([a, np.zeros((t - a.shape[0], a.shape[1]))])
    if b.shape[0] < t:
        b = np.vstack([b, np.zeros((t - b.shape[0], b.shape[1]))])
    return lam * a + (1.0 - lam) * b


def mix_labels_conventional(y_i, y_j, lam: float) -> SoftLabel:
    """Convex combination of two soft labels with the mixing coefficient."""
    lam = _check_lambda(lam)
    p_i = probs_of(y_i)
    p_j = probs_of(y_j)
    return SoftLabel(lam * p_i + (1.0 - lam) * p_j)


def adaptive_label_weight(l_i: int, l_j: int, lam: float) -> float:
    """Weight on the first label: lam*l_i / (lam*l_i + (1-lam)*l_j).

    For equal lengths this reduces to lam; at lam in {0, 1} it degenerates to
    the pure second/first label.
    """
    if int(l_i) != l_i or int(l_j) != l_j or l_i < 1 or l_j < 1:
        raise ValidationError(f"lengths must be positive integers, got ({l_i!r}, {l_j!r})")
    lam = _check_lambda(lam)
    num = lam * l_i
    return num / (num + (1.0 - lam) * l_j)


def mix_labels_adaptive(y_i, l_i: int, y_j, l_j: int, lam: float) -> SoftLabel:
    """Length-adaptive label mixing: each source label is weighted by the
    mixing coefficient times its sequence length, normalized to sum 1."""
    w_i = adaptive_label_weight(l_i, l_j, lam)
    p_i = probs_of(y_i)
    p_j = probs_of(y_j)
    return SoftLabel(w_i * p_i + (1.0 - w_i) * p_j)


def mix_batch(samples, policy: MixupPolicy, rng_seed, n_classes: int) -> list[MixedSample]:
    """Mix a batch pairwise under a seeded random permutation.

    Sample i is paired with the sample at permuted position i (self-pairing
    is allowed and harmless: it reproduces the original sample). In
    conventional mode the coefficient is drawn from Beta(alpha, alpha) per
    pair; in label-adaptive mode it is the fixed constant. ``rng_seed`` may
    be an integer or a ``numpy.random.Generator``.
    """
    samples = list(samples)
    if policy.mode == "off":
        return [
            MixedSample(s.signal, s.length, _class_label(s, n_classes), (s.length, s.length), 1.0)
            for s in samples
        ]
    if len(samples) < 2:
        raise ValidationError(f"mixing needs at least 2 samples, got {len(samples)}")
    if isinstance(rng_seed, np.random.Generator):
        rng = rng_seed
    else:
        rng = np.random.default_rng(rng_seed)
    perm = rng.permutation(len(samples))
    mixed = []
    for i, s_i in enumerate(samples):
        s_j = samples[perm[i]]
        if policy.mode == "conventional":
            lam = float(rng.beta(policy.alpha, policy.alpha))
        else:
            lam = policy.lambda_fixed
        y_i = _class_label(s_i, n_classes)
        y_j = _class_label(s_j, n_classes)
        if policy.mode == "conventional":
            label = mix_labels_conventional(y_i, y_j, lam)
        else:
            label = mix_labels_adaptive(y_i, s_i.length, y_j, s_j.length, lam)
        signal = mix_signals(s_i.signal, s_j.signal, lam)
        mixed.append(
            MixedSample(signal, max(s_i.length, s_j.length), label, (s_i.length, s_j.length), lam)
        )
    return mixed


def _class_label(sample: SpeechSample, n_classes: int) -> SoftLabel:
    if sample.label >= n_classes:
        raise ValidationError(f"sample label {sample.label} out of range for {n_classes} classes")
    vec = np.zeros(n_classes)
    vec[sample.label] = 1.0
    return SoftLabel(vec)
