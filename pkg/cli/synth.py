"""Seeded synthetic corpora standing in for real music collections.

Every class (or tag) owns a triad of pitch classes and a noise band. A clip
is a sequence of chord segments, each voicing the owned pitch classes in
random octaves, over band-passed noise. Each clip draws from its own
generator seeded by (seed, class, index), so any clip can be rebuilt alone.
"""
import logging
from pathlib import Path

import numpy as np
import scipy.signal

from acoustics.audio import TARGET_SAMPLE_RATE, write_wav
from acoustics.models import MAX_TRAINING_SECONDS, MIN_TRAINING_SECONDS, AudioClip
from shared.errors import InvalidInput
from shared.manifest import Manifest, ManifestRow, write_manifest

logger = logging.getLogger(__name__)

MODES = ('genre', 'tags')
MANIFEST_NAME = 'manifest.tsv'
SEGMENT_SECONDS = 2.0
PEAK = 0.8
# octaves 5 and 6 (C5 = 72) keep every note above the chroma resolution limit
LOWEST_MIDI = 72
NOISE_LOW_HZ = 150.0
NOISE_HIGH_HZ = 12000.0
PRETRAIN_CLASS = 10_000


def class_pitch_classes(index):
    """Major triad on root 7*index mod 12, so consecutive classes sit a fifth apart."""
    root = (7 * index) % 12
    return (root, (root + 4) % 12, (root + 7) % 12)


def class_noise_band(index, n_classes):
    """Index-th of n_classes geometrically spaced bands between 150 Hz and 12 kHz."""
    edges = np.geomspace(NOISE_LOW_HZ, NOISE_HIGH_HZ, max(n_classes, 1) + 1)
    return float(edges[index]), float(edges[index + 1])


def _midi_to_hz(midi):
    return 440.0 * 2.0 ** ((np.asarray(midi, dtype=np.float64) - 69.0) / 12.0)


def _chord_track(pitch_classes, n_samples, sample_rate, rng):
    t = np.arange(n_samples) / sample_rate
    out = np.zeros(n_samples)
    segment = int(SEGMENT_SECONDS * sample_rate)
    fade = np.hanning(2 * min(segment, 2048))
    for start in range(0, n_samples, segment):
        stop = min(start + segment, n_samples)
        envelope = np.ones(stop - start)
        half = min(fade.size // 2, envelope.size // 2)
        if half:
            envelope[:half] = fade[:half]
            envelope[-half:] = fade[-half:]
        for pc in pitch_classes:
            midi = LOWEST_MIDI + pc + 12 * int(rng.integers(0, 2))
            phase = rng.uniform(0, 2 * np.pi)
            amplitude = rng.uniform(0.5, 1.0)
            out[start:stop] += amplitude * envelope * np.sin(2 * np.pi * _midi_to_hz(midi) * t[start:stop] + phase)
    return out


def _noise_track(band, n_samples, sample_rate, rng):
    low, high = band
    high = min(high, 0.45 * sample_rate)
    sos = scipy.signal.butter(4, [low, high], btype='bandpass', fs=sample_rate, output='sos')
    return scipy.signal.sosfilt(sos, rng.standard_normal(n_samples))


def synthesize_clip(components, duration_s, rng, n_classes, sample_rate=TARGET_SAMPLE_RATE,
                    noise_level=0.3, clip_id=''):
    """Mix the chord and noise band of every class index in components."""
    n_samples = int(round(duration_s * sample_rate))
    y = np.zeros(n_samples)
    for index in components:
        y += _chord_track(class_pitch_classes(index), n_samples, sample_rate, rng)
        noise = _noise_track(class_noise_band(index, n_classes), n_samples, sample_rate, rng)
        y += noise_level * noise / (np.abs(noise).max() or 1.0)
    peak = np.abs(y).max()
    if peak > 0:
        y *= PEAK / peak
    return AudioClip(samples=y, sample_rate=sample_rate, clip_id=clip_id)


def _tags_split(index, per_class):
    position = index / max(per_class, 1)
    if position < 0.7:
        return 'train'
    return 'valid' if position < 0.85 else 'test'


def synthesize_corpus(out_dir, n_classes=3, per_class=20, mode='genre', n_pretrain=0, seed=0,
                      min_s=MIN_TRAINING_SECONDS, max_s=MAX_TRAINING_SECONDS,
                      sample_rate=TARGET_SAMPLE_RATE) -> Manifest:
    """Write WAVs under out_dir/audio and the manifest at out_dir/manifest.tsv.

    genre: per_class single-label clips per class, all in the train split
    (the fold protocol partitions them). tags: n_classes * per_class clips
    carrying one to three tags each, split 70/15/15 into train/valid/test.
    n_pretrain unlabeled clips mixing random classes go to the pretrain split.
    """
    if mode not in MODES:
        raise InvalidInput(f'synth mode must be one of {", ".join(MODES)}, got {mode!r}')
    if n_classes < 2 or per_class < 1:
        raise InvalidInput('synth needs at least 2 classes and 1 clip per class')
    if not 0 < min_s <= max_s:
        raise InvalidInput('synth durations need 0 < min_s <= max_s')

    out_dir = Path(out_dir)
    audio_dir = out_dir / 'audio'
    audio_dir.mkdir(parents=True, exist_ok=True)
    prefix = 'genre' if mode == 'genre' else 'tag'
    vocab = tuple(f'{prefix}{i:02d}' for i in range(n_classes))

    rows = []

    def emit(clip_id, components, split, labels, rng):
        duration = float(rng.uniform(min_s, max_s))
        clip = synthesize_clip(components, duration, rng, n_classes, sample_rate, clip_id=clip_id)
        write_wav(audio_dir / f'{clip_id}.wav', clip)
        rows.append(ManifestRow(clip_id, f'audio/{clip_id}.wav', split, labels, round(clip.duration_s, 3)))

    for c in range(n_classes):
        for i in range(per_class):
            rng = np.random.default_rng([seed, c, i])
            if mode == 'genre':
                emit(f'{vocab[c]}_{i:04d}', [c], 'train', (vocab[c],), rng)
            else:
                # the owning tag plus up to two others
                extra = rng.choice(n_classes, size=int(rng.integers(0, 3)), replace=False)
                components = sorted({c, *extra.tolist()})
                emit(f'clip{c:02d}_{i:04d}', components, _tags_split(i, per_class),
                     tuple(vocab[k] for k in components), rng)

    for i in range(n_pretrain):
        rng = np.random.default_rng([seed, PRETRAIN_CLASS, i])
        components = sorted(set(rng.choice(n_classes, size=int(rng.integers(1, 3))).tolist()))
        emit(f'pre_{i:05d}', components, 'pretrain', (), rng)

    manifest = Manifest(vocab=vocab, rows=rows, root=out_dir)
    write_manifest(out_dir / MANIFEST_NAME, manifest)
    logger.info(f'Synthesized {len(rows)} clips ({mode}, {n_classes} classes) into {out_dir}')
    return manifest
