"""PCM WAV ingestion and the long-track cropping used for pre-training corpora."""
import logging
from math import gcd

import numpy as np
import scipy.io.wavfile
import scipy.signal

from shared.errors import IoError

from .models import MAX_TRAINING_SECONDS, MIN_TRAINING_SECONDS, AudioClip

logger = logging.getLogger(__name__)

TARGET_SAMPLE_RATE = 44100

_INT_SCALE = {
    np.dtype('int16'): 32768.0,
    np.dtype('int32'): 2147483648.0,
}


def _to_float(data):
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 128.0
    if data.dtype in _INT_SCALE:
        return data.astype(np.float64) / _INT_SCALE[data.dtype]
    if np.issubdtype(data.dtype, np.floating):
        return data.astype(np.float64)
    raise IoError(f'unsupported WAV sample type {data.dtype}')


def load_wav(path, clip_id='', target_rate=TARGET_SAMPLE_RATE) -> AudioClip:
    """Read a PCM WAV file as a mono clip at target_rate."""
    try:
        rate, data = scipy.io.wavfile.read(path)
    except (OSError, ValueError) as e:
        raise IoError(f'cannot read WAV {path}: {e}') from e

    samples = _to_float(data)
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if rate != target_rate:
        g = gcd(int(rate), int(target_rate))
        samples = scipy.signal.resample_poly(samples, target_rate // g, rate // g)
        logger.debug(f'Resampled {path} from {rate} Hz to {target_rate} Hz')
    return AudioClip(samples=np.clip(samples, -1.0, 1.0), sample_rate=target_rate, clip_id=clip_id)


def write_wav(path, clip: AudioClip):
    """Write a clip as 16-bit PCM mono."""
    pcm = np.round(np.clip(clip.samples, -1.0, 1.0) * 32767.0).astype('<i2')
    try:
        scipy.io.wavfile.write(path, clip.sample_rate, pcm)
    except OSError as e:
        raise IoError(f'cannot write WAV {path}: {e}') from e


def crop_clips(clip: AudioClip, rng, min_s=MIN_TRAINING_SECONDS, max_s=MAX_TRAINING_SECONDS):
    """Cut a long track into consecutive clips of random duration in [min_s, max_s].

    Tracks no longer than max_s are returned unchanged. A trailing remainder
    shorter than min_s is dropped.
    """
    if clip.duration_s <= max_s:
        return [clip]

    pieces = []
    start = 0
    total = len(clip.samples)
    while True:
        length = int(round(rng.uniform(min_s, max_s) * clip.sample_rate))
        stop = min(start + length, total)
        if (stop - start) / clip.sample_rate < min_s:
            break
        pieces.append(AudioClip(
            samples=clip.samples[start:stop],
            sample_rate=clip.sample_rate,
            clip_id=f'{clip.clip_id}#{len(pieces)}',
        ))
        start = stop
        if start >= total:
            break
    return pieces
