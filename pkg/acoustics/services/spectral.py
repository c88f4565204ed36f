"""Spectral building blocks of the 324-channel frame features.

All functions work on frame-major matrices (rows are frames) and never
mutate their inputs.
"""
import functools
import warnings

import librosa
import numpy as np
import scipy.fft
import scipy.signal
import scipy.sparse
from numpy.lib.stride_tricks import sliding_window_view

from shared.errors import ConfigError, InvalidInput

from ..config import FeatureConfig
from ..models import AudioClip

CMVN_STD_FLOOR = 1e-8
CQT_CHUNK_FRAMES = 64


def _is_power_of_two(n):
    return n > 0 and (n & (n - 1)) == 0


def frame_count(n_samples, hop_len):
    """Frames produced by centred framing of n_samples."""
    return 1 + n_samples // hop_len


@functools.lru_cache(maxsize=8)
def _analysis_window(window_fn, length):
    return scipy.signal.get_window(window_fn, length, fftbins=True)


def stft_magnitude(clip: AudioClip, cfg: FeatureConfig):
    """Magnitude STFT, N x (window_len/2 + 1), centred frames with reflect padding."""
    y = np.asarray(clip.samples, dtype=np.float64)
    if y.size == 0:
        raise InvalidInput('cannot take the STFT of an empty clip')
    if not _is_power_of_two(cfg.window_len):
        raise ConfigError(f'feature.window_len must be a power of two, got {cfg.window_len}')

    pad = cfg.window_len // 2
    padded = np.pad(y, pad, mode='reflect')
    frames = sliding_window_view(padded, cfg.window_len)[::cfg.hop_len]
    frames = frames[:frame_count(y.size, cfg.hop_len)]
    window = _analysis_window(cfg.window_fn, cfg.window_len)
    return np.abs(scipy.fft.rfft(frames * window, axis=1))


@functools.lru_cache(maxsize=4)
def _mel_filterbank(sample_rate, window_len, n_mels):
    with warnings.catch_warnings():
        # the lowest HTK bands are narrower than one FFT bin at 2048 points
        warnings.simplefilter('ignore', UserWarning)
        return librosa.filters.mel(
            sr=sample_rate,
            n_fft=window_len,
            n_mels=n_mels,
            fmin=0.0,
            fmax=sample_rate / 2.0,
            htk=True,
            norm=None,
            dtype=np.float64,
        )


def mel_band_centers(cfg: FeatureConfig):
    """Centre frequency in Hz of every mel band."""
    edges = librosa.mel_frequencies(
        n_mels=cfg.n_mels + 2, fmin=0.0, fmax=cfg.sample_rate / 2.0, htk=True
    )
    return edges[1:-1]


def mel_spectrogram(mag, cfg: FeatureConfig):
    """Triangular HTK mel filterbank applied to the power spectrum."""
    mag = np.asarray(mag, dtype=np.float64)
    if mag.ndim != 2 or mag.shape[1] != cfg.n_fft_bins:
        raise InvalidInput(f'expected N x {cfg.n_fft_bins} magnitudes, got {mag.shape}')
    fb = _mel_filterbank(cfg.sample_rate, cfg.window_len, cfg.n_mels)
    return (mag ** 2) @ fb.T


def cqt_frequencies(cfg: FeatureConfig):
    return cfg.cqt_fmin * 2.0 ** (np.arange(cfg.n_cqt_bins) / cfg.cqt_bins_per_octave)


@functools.lru_cache(maxsize=4)
def _cqt_kernel(sample_rate, fmin, n_bins, bins_per_octave, sparsity):
    """Sparse spectral kernel of Hamming-windowed complex atoms, one row per bin.

    Row k holds conj(FFT(atom_k)) / n_fft restricted to non-negative
    frequencies, so that (row . rfft(frame)) equals the time-domain inner
    product of the frame with atom_k.
    """
    q = 1.0 / (2.0 ** (1.0 / bins_per_octave) - 1.0)
    freqs = fmin * 2.0 ** (np.arange(n_bins) / bins_per_octave)
    lengths = np.ceil(q * sample_rate / freqs).astype(int)
    n_fft = int(2 ** np.ceil(np.log2(lengths.max())))

    rows = []
    for freq, length in zip(freqs, lengths):
        t = np.arange(length) - (length - 1) / 2.0
        atom = scipy.signal.get_window('hamming', length, fftbins=False)
        atom = atom * np.exp(2j * np.pi * freq * t / sample_rate) / length
        buf = np.zeros(n_fft, dtype=np.complex128)
        start = n_fft // 2 - length // 2
        buf[start:start + length] = atom
        spec = scipy.fft.fft(buf)[:n_fft // 2 + 1]
        mag = np.abs(spec)
        spec[mag < sparsity * mag.max()] = 0.0
        rows.append(np.conj(spec) / n_fft)
    return scipy.sparse.csr_matrix(np.vstack(rows)), n_fft


def cqt_spectrogram(clip: AudioClip, cfg: FeatureConfig):
    """Constant-Q magnitudes on the STFT hop grid, N x n_cqt_bins."""
    freqs = cqt_frequencies(cfg)
    nyquist = cfg.sample_rate / 2.0
    if freqs[-1] >= nyquist:
        raise ConfigError(
            f'highest CQT bin {freqs[-1]:.1f} Hz is above the Nyquist frequency {nyquist:.1f} Hz'
        )
    y = np.asarray(clip.samples, dtype=np.float64)
    if y.size == 0:
        raise InvalidInput('cannot take the CQT of an empty clip')

    kernel, n_fft = _cqt_kernel(
        cfg.sample_rate, cfg.cqt_fmin, cfg.n_cqt_bins, cfg.cqt_bins_per_octave, cfg.cqt_sparsity
    )
    n_frames = frame_count(y.size, cfg.hop_len)
    padded = np.pad(y, n_fft // 2, mode='constant')
    frames = sliding_window_view(padded, n_fft)[::cfg.hop_len][:n_frames]

    out = np.empty((n_frames, cfg.n_cqt_bins), dtype=np.float64)
    for start in range(0, n_frames, CQT_CHUNK_FRAMES):
        chunk = scipy.fft.rfft(frames[start:start + CQT_CHUNK_FRAMES], axis=1)
        out[start:start + CQT_CHUNK_FRAMES] = np.abs(kernel @ chunk.T).T
    return out


@functools.lru_cache(maxsize=4)
def _chroma_fold(sample_rate, window_len, n_chroma):
    n_bins = window_len // 2 + 1
    freqs = np.arange(1, n_bins) * sample_rate / window_len
    pitch = np.round(librosa.hz_to_midi(freqs)).astype(int)
    fold = np.zeros((n_bins, n_chroma))
    # DC carries no pitch and stays unassigned
    fold[np.arange(1, n_bins), np.mod(pitch, n_chroma)] = 1.0
    return fold


def chromagram(mag, cfg: FeatureConfig):
    """STFT power folded onto 12 pitch classes (0 = C), max-normalized per frame."""
    mag = np.asarray(mag, dtype=np.float64)
    if mag.ndim != 2 or mag.shape[1] != cfg.n_fft_bins:
        raise InvalidInput(f'expected N x {cfg.n_fft_bins} magnitudes, got {mag.shape}')
    chroma = (mag ** 2) @ _chroma_fold(cfg.sample_rate, cfg.window_len, cfg.n_chroma)
    peak = chroma.max(axis=1, keepdims=True)
    return np.divide(chroma, peak, out=np.zeros_like(chroma), where=peak > 0)


def mfcc_with_delta(log_mel, cfg: FeatureConfig):
    """Orthonormal DCT-II cepstra of log-mel frames followed by their deltas."""
    log_mel = np.asarray(log_mel, dtype=np.float64)
    if log_mel.ndim != 2 or log_mel.shape[0] < 1:
        raise InvalidInput('mfcc_with_delta needs at least one log-mel frame')
    mfcc = scipy.fft.dct(log_mel, type=2, norm='ortho', axis=1)[:, :cfg.n_mfcc]
    # regression slope over delta_width frames, edges replicated
    delta = librosa.feature.delta(mfcc, width=cfg.delta_width, order=1, axis=0, mode='nearest')
    return np.hstack([mfcc, delta])


def log_compress(S, epsilon):
    S = np.asarray(S, dtype=np.float64)
    if np.any(S < 0):
        raise InvalidInput('log_compress expects a nonnegative spectrogram')
    return np.log(10.0 * S + epsilon)


def cmvn(features):
    """Per-channel zero mean, unit population variance; flat channels become zero."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 1:
        raise InvalidInput('cmvn needs an N x C matrix with N >= 1')
    centred = features - features.mean(axis=0)
    std = features.std(axis=0)
    live = std >= CMVN_STD_FLOOR
    out = np.zeros_like(centred)
    out[:, live] = centred[:, live] / std[live]
    return out
