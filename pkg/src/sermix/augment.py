"""Seeded, length-preserving waveform-style augmentations.

Only augmentations that keep the frame count unchanged are implemented, so
sequence lengths stay exact for the length-adaptive label weights downstream.
Each step fires independently with its own probability; labels, speakers and
sessions are never touched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import SpeechSample
from .errors import ValidationError


def _check_probability(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"apply probability must lie in [0, 1], got {p!r}")


@dataclass(frozen=True)
class GaussianNoise:
    """Adds zero-mean Gaussian noise with standard deviation ``sigma``."""

    sigma: float
    probability: float = 1.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValidationError(f"sigma must be >= 0, got {self.sigma!r}")
        _check_probability(self.probability)

    def transform(self, signal: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return signal + rng.normal(0.0, self.sigma, size=signal.shape)


@dataclass(frozen=True)
class Gain:
    """Scales the signal by 10^(db/20)."""

    db: float
    probability: float = 1.0

    def __post_init__(self):
        _check_probability(self.probability)

    def transform(self, signal: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return signal * (10.0 ** (self.db / 20.0))


@dataclass(frozen=True)
class PolarityInversion:
    """Negates the signal; applying it twice is the identity."""

    probability: float = 1.0

    def __post_init__(self):
        _check_probability(self.probability)

    def transform(self, signal: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return -signal


@dataclass(frozen=True)
class TimeMask:
    """Zeroes one contiguous span of at most ``max_fraction * length`` frames."""

    max_fraction: float
    probability: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.max_fraction < 1.0:
            raise ValidationError(f"max_fraction must lie in [0, 1), got {self.max_fraction!r}")
        _check_probability(self.probability)

    def transform(self, signal: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        t = signal.shape[0]
        max_width = int(math.floor(self.max_fraction * t))
        width = int(rng.integers(0, max_width + 1))
        if width == 0:
            return signal
        start = int(rng.integers(0, t - width + 1))
        out = signal.copy()
        out[start : start + width] = 0.0
        return out


@dataclass(frozen=True)
class ClippingDistortion:
    """Clamps magnitudes above the given percentile of |signal|."""

    percentile: float
    probability: float = 1.0

    def __post_init__(self):
        if not 50.0 < self.percentile <= 100.0:
            raise ValidationError(f"percentile must lie in (50, 100], got {self.percentile!r}")
        _check_probability(self.probability)

    def transform(self, signal: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        threshold = float(np.percentile(np.abs(signal), self.percentile))
        return np.clip(signal, -threshold, threshold)


STEP_TYPES = {
    "gaussian_noise": GaussianNoise,
    "gain": Gain,
    "polarity_inversion": PolarityInversion,
    "time_mask": TimeMask,
    "clipping_distortion": ClippingDistortion,
}


@dataclass(frozen=True)
class AugmentChain:
    """Ordered augmentation steps applied per sample with a shared rng."""

    steps: tuple = ()
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))


def apply(chain: AugmentChain, sample: SpeechSample, rng: np.random.Generator | None = None) -> SpeechSample:
    """Run the chain on one sample; a fresh generator seeded from the chain
    is used when ``rng`` is not supplied."""
    if rng is None:
        rng = np.random.default_rng(chain.seed)
    signal = sample.signal
    for step in chain.steps:
        if rng.random() < step.probability:
            signal = step.transform(signal, rng)
    return SpeechSample(signal, sample.label, sample.speaker_id, sample.session_id)
