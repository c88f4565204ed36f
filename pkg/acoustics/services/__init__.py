from .pipeline import extract_features  # noqa: F401
from .spectral import (  # noqa: F401
    chromagram,
    cmvn,
    cqt_frequencies,
    cqt_spectrogram,
    frame_count,
    log_compress,
    mel_band_centers,
    mel_spectrogram,
    mfcc_with_delta,
    stft_magnitude,
)
