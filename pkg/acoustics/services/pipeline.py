import logging

import numpy as np

from ..config import FeatureConfig
from ..models import AudioClip, FrameSequence
from .spectral import (
    chromagram,
    cmvn,
    cqt_spectrogram,
    log_compress,
    mel_spectrogram,
    mfcc_with_delta,
    stft_magnitude,
)

logger = logging.getLogger(__name__)


def extract_features(clip: AudioClip, cfg: FeatureConfig = None) -> FrameSequence:
    """Compute the normalized 324-channel frame sequence of one clip.

    Channels are concatenated as chroma | mfcc | mfcc delta | log-mel | log-CQT.
    Frames beyond cfg.max_frames are dropped before normalization so the
    returned sequence itself is zero-mean, unit-variance per channel.
    """
    cfg = cfg or FeatureConfig()
    clip.validate(cfg)

    mag = stft_magnitude(clip, cfg)
    chroma = chromagram(mag, cfg)
    log_mel = log_compress(mel_spectrogram(mag, cfg), cfg.epsilon)
    log_cqt = log_compress(cqt_spectrogram(clip, cfg), cfg.epsilon)
    cepstra = mfcc_with_delta(log_mel, cfg)

    data = np.hstack([chroma, cepstra, log_mel, log_cqt])
    if data.shape[0] > cfg.max_frames:
        logger.debug(f'Truncating {clip.clip_id or "clip"} from {data.shape[0]} to {cfg.max_frames} frames')
        data = data[:cfg.max_frames]

    return FrameSequence(
        data=cmvn(data).astype(np.float32),
        clip_id=clip.clip_id,
        hop_s=cfg.hop_len / cfg.sample_rate,
        channel_layout=cfg.channel_layout(),
    )
