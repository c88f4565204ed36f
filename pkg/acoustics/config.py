import hashlib
import json
from dataclasses import asdict, dataclass

from shared.errors import ConfigError

FEATURE_DIM = 324


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate: int = 44100
    window_len: int = 2048
    hop_len: int = 1024
    window_fn: str = 'hamming'
    n_chroma: int = 12
    n_mfcc: int = 20
    n_mels: int = 128
    n_cqt_bins: int = 144
    cqt_bins_per_octave: int = 24
    cqt_fmin: float = 32.703
    cqt_sparsity: float = 0.0054
    delta_width: int = 9
    epsilon: float = 1e-6
    max_frames: int = 1600

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ConfigError('feature.sample_rate must be positive')
        if self.hop_len < 1 or self.hop_len > self.window_len:
            raise ConfigError('feature.hop_len must be in [1, window_len]')
        if self.delta_width < 3 or self.delta_width % 2 == 0:
            raise ConfigError('feature.delta_width must be odd and >= 3')
        if not self.epsilon > 0:
            raise ConfigError('feature.epsilon must be > 0')
        if self.cqt_fmin <= 0 or self.cqt_bins_per_octave < 1:
            raise ConfigError('feature.cqt_fmin and feature.cqt_bins_per_octave must be positive')
        if not 0 <= self.cqt_sparsity < 1:
            raise ConfigError('feature.cqt_sparsity must be in [0, 1)')
        if self.max_frames < 1:
            raise ConfigError('feature.max_frames must be >= 1')
        total = self.n_chroma + 2 * self.n_mfcc + self.n_mels + self.n_cqt_bins
        if total != FEATURE_DIM:
            raise ConfigError(f'feature groups add up to {total} channels, expected {FEATURE_DIM}')
        if self.n_mfcc > self.n_mels:
            raise ConfigError('feature.n_mfcc cannot exceed feature.n_mels')

    @property
    def n_fft_bins(self):
        return self.window_len // 2 + 1

    def channel_layout(self):
        """Named (start, stop) channel ranges, in concatenation order."""
        layout = {}
        start = 0
        for name, width in (
            ('chroma', self.n_chroma),
            ('mfcc', self.n_mfcc),
            ('mfcc_delta', self.n_mfcc),
            ('mel', self.n_mels),
            ('cqt', self.n_cqt_bins),
        ):
            layout[name] = (start, start + width)
            start += width
        return layout

    def digest(self):
        """Stable hash of every field; part of the feature cache key."""
        payload = json.dumps(asdict(self), sort_keys=True).encode('utf-8')
        return hashlib.sha256(payload).hexdigest()
