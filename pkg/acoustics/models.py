from dataclasses import dataclass, field

import numpy as np

from shared.errors import InvalidInput

from .config import FEATURE_DIM, FeatureConfig

MIN_TRAINING_SECONDS = 10.0
MAX_TRAINING_SECONDS = 35.0


@dataclass
class AudioClip:
    samples: np.ndarray
    sample_rate: int = 44100
    clip_id: str = ''

    @property
    def duration_s(self):
        return len(self.samples) / self.sample_rate

    def validate(self, cfg: FeatureConfig):
        if len(self.samples) == 0:
            raise InvalidInput(f'clip {self.clip_id or "<unnamed>"} is empty')
        if self.sample_rate != cfg.sample_rate:
            raise InvalidInput(
                f'clip {self.clip_id or "<unnamed>"} has sample rate {self.sample_rate}, '
                f'expected {cfg.sample_rate}'
            )


@dataclass
class FrameSequence:
    """N x 324 normalized feature frames of one clip."""
    data: np.ndarray
    clip_id: str = ''
    hop_s: float = 1024 / 44100
    channel_layout: dict = field(default_factory=lambda: FeatureConfig().channel_layout())

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.shape[1] != FEATURE_DIM:
            raise InvalidInput(f'frame data must be N x {FEATURE_DIM}, got {self.data.shape}')

    @property
    def n_frames(self):
        return self.data.shape[0]

    def group(self, name):
        start, stop = self.channel_layout[name]
        return self.data[:, start:stop]

    def replace(self, data):
        return FrameSequence(data=data, clip_id=self.clip_id, hop_s=self.hop_s,
                             channel_layout=self.channel_layout)
