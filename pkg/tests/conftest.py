# Shared fixtures: synthetic signals and small corpora

import numpy as np
import pytest

from cry_detection.audio_io import CANONICAL_RATE
from cry_detection.corpus import SynthSpec, generate_synthetic


@pytest.fixture
def rate():
    return CANONICAL_RATE


@pytest.fixture
def sine():
    """Factory for sine tones: sine(frequency, seconds, amplitude=0.5, rate=22050)."""
    def make(frequency, seconds, amplitude=0.5, rate=CANONICAL_RATE, phase=0.0):
        t = np.arange(int(round(seconds * rate))) / rate
        return amplitude * np.sin(2 * np.pi * frequency * t + phase)

    return make


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """Two participants, 90 s each, cries over digital silence."""
    spec = SynthSpec(n_participants=2, recording_seconds=90, noise="silence", seed=3)
    directory = tmp_path_factory.mktemp("small_corpus")

    return directory, generate_synthetic(spec, directory)
