"""Pytest configuration and fixtures."""
import os

import numpy as np
import pytest
import torch

# a stray CADENZA_CONFIG from the developer's shell must not leak into tests
os.environ.pop('CADENZA_CONFIG', None)

from acoustics import extract_features  # noqa: E402
from acoustics.config import FEATURE_DIM, FeatureConfig  # noqa: E402
from acoustics.models import AudioClip, FrameSequence  # noqa: E402
from cli.synth import synthesize_clip  # noqa: E402
from encoder.config import ModelConfig, get_preset  # noqa: E402


@pytest.fixture
def rng():
    """Fresh seeded generator per test."""
    return np.random.default_rng(0)


@pytest.fixture
def feature_cfg():
    return FeatureConfig()


@pytest.fixture
def make_sine():
    """Factory for pure-tone clips at 44.1 kHz."""
    def _make(freq, seconds=2.0, amplitude=0.5, sample_rate=44100, clip_id='sine'):
        t = np.arange(int(round(seconds * sample_rate))) / sample_rate
        return AudioClip(amplitude * np.sin(2 * np.pi * freq * t), sample_rate, clip_id)
    return _make


@pytest.fixture
def testing_cfg():
    """L=2, H=16, A=2, no dropout."""
    return get_preset('testing')


@pytest.fixture
def small_cfg():
    return ModelConfig(n_layers=2, hidden_dim=32, n_heads=4, dropout_rate=0.0, max_positions=256)


@pytest.fixture
def make_sequences():
    """Factory for random N x 324 frame sequences with per-clip structure."""
    def _make(count=6, n_frames=40, seed=0, vary=True):
        gen = np.random.default_rng(seed)
        out = []
        for i in range(count):
            n = int(n_frames - (i % 3) * 5) if vary else n_frames
            base = gen.standard_normal(FEATURE_DIM)
            data = (base + 0.3 * gen.standard_normal((n, FEATURE_DIM))).astype(np.float32)
            out.append(FrameSequence(data=data, clip_id=f'seq{i:03d}'))
        return out
    return _make


@pytest.fixture(scope='session')
def synthetic_features():
    """3 classes x 50 synthetic 3 s clips as (sequences, class indices), built once."""
    cfg = FeatureConfig()
    seqs, classes = [], []
    for c in range(3):
        for i in range(50):
            clip = synthesize_clip([c], 3.0, np.random.default_rng([0, c, i]), n_classes=3,
                                   clip_id=f'genre{c:02d}_{i:04d}')
            seqs.append(extract_features(clip, cfg))
            classes.append(c)
    return seqs, np.array(classes)


@pytest.fixture(autouse=True)
def _torch_seed():
    torch.manual_seed(0)
    yield


def pytest_configure(config):
    """Register custom markers."""
    config.addinivalue_line(
        "markers", "integration: mark test as an integration test"
    )
    config.addinivalue_line(
        "markers", "slow: long-running training or acceptance run"
    )
