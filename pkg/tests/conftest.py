import numpy as np
import pytest

from sermix import EmotionSet, SpeechSample


@pytest.fixture
def emotions():
    return EmotionSet()


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def make_sample(rng, label=0, length=5, d_in=3, speaker="spk00", session="sess0"):
    return SpeechSample(rng.standard_normal((length, d_in)), label, speaker, session)


@pytest.fixture
def tiny_dataset(rng):
    """Two sessions, two speakers each, a few samples per class."""
    samples = []
    for c in range(4):
        for i in range(6):
            speaker = f"spk{i % 4}"
            session = f"sess{(i % 4) // 2}"
            samples.append(make_sample(rng, label=c, length=4 + (i % 3), d_in=3,
                                       speaker=speaker, session=session))
    return samples
