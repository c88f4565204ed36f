"""MCFE feature cache files.

Layout: b'MCFE', u32 version, u32 n_frames, u32 n_channels, then the frames
as row-major little-endian float32. All integers little-endian.
"""
import hashlib
import os

import numpy as np

from shared.errors import FormatError, IoError

from .config import FEATURE_DIM, FeatureConfig
from .models import FrameSequence

MAGIC = b'MCFE'
VERSION = 1
HEADER_BYTES = 16


def cache_path(cache_dir, clip_id):
    safe = clip_id.replace('/', '_').replace('\\', '_')
    return os.path.join(cache_dir, f'{safe}.mcfe')


def encode_feature_cache(seq: FrameSequence) -> bytes:
    header = MAGIC + np.array([VERSION, seq.n_frames, seq.data.shape[1]], dtype='<u4').tobytes()
    return header + np.ascontiguousarray(seq.data, dtype='<f4').tobytes()


def decode_feature_cache(blob: bytes, clip_id='', cfg: FeatureConfig = None) -> FrameSequence:
    cfg = cfg or FeatureConfig()
    if len(blob) < HEADER_BYTES or blob[:4] != MAGIC:
        raise FormatError(f'not an MCFE feature file: {clip_id or "<bytes>"}')
    version, n_frames, n_channels = (int(v) for v in np.frombuffer(blob[4:HEADER_BYTES], dtype='<u4'))
    if version != VERSION:
        raise FormatError(f'unsupported MCFE version {version}')
    if n_channels != FEATURE_DIM:
        raise FormatError(f'MCFE file has {n_channels} channels, expected {FEATURE_DIM}')
    expected = HEADER_BYTES + 4 * n_frames * n_channels
    if len(blob) != expected:
        raise FormatError(f'MCFE payload is {len(blob)} bytes, expected {expected}')
    data = np.frombuffer(blob[HEADER_BYTES:], dtype='<f4').reshape(n_frames, n_channels)
    return FrameSequence(
        data=data.astype(np.float32),
        clip_id=clip_id,
        hop_s=cfg.hop_len / cfg.sample_rate,
        channel_layout=cfg.channel_layout(),
    )


def write_feature_cache(path, seq: FrameSequence):
    tmp = f'{path}.tmp'
    try:
        with open(tmp, 'wb') as f:
            f.write(encode_feature_cache(seq))
        os.replace(tmp, path)
    except OSError as e:
        raise IoError(f'cannot write feature cache {path}: {e}') from e


def read_feature_cache(path, clip_id='', cfg: FeatureConfig = None) -> FrameSequence:
    try:
        with open(path, 'rb') as f:
            blob = f.read()
    except OSError as e:
        raise IoError(f'missing feature cache for clip {clip_id or path}: {e}') from e
    return decode_feature_cache(blob, clip_id=clip_id, cfg=cfg)


def content_key(audio_path, cfg: FeatureConfig):
    """Cache key: sha256 of the audio bytes joined with the feature config digest."""
    digest = hashlib.sha256()
    try:
        with open(audio_path, 'rb') as f:
            for block in iter(lambda: f.read(1 << 20), b''):
                digest.update(block)
    except OSError as e:
        raise IoError(f'cannot read audio {audio_path}: {e}') from e
    return f'{digest.hexdigest()}:{cfg.digest()}'


def is_up_to_date(path, key):
    sidecar = f'{path}.sha256'
    if not (os.path.exists(path) and os.path.exists(sidecar)):
        return False
    with open(sidecar, encoding='utf-8') as f:
        return f.read().strip() == key


def mark_up_to_date(path, key):
    with open(f'{path}.sha256', 'w', encoding='utf-8') as f:
        f.write(key + '\n')
