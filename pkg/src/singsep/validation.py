"""Input checks shared by the estimator wrappers."""

import numpy as np

from .audio_features.types import N_BINS, N_FEATURES, SAMPLE_RATE, AudioClip, MagSpectrogram, VocoderFeatures
from .exceptions import DataError, UsageError


def check_clip(x, sample_rate=SAMPLE_RATE) -> AudioClip:
    """Accept an ``AudioClip`` or a 1-D sample array at ``sample_rate``."""
    if isinstance(x, AudioClip):
        return x
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DataError(f"expected mono samples (1-D), got shape {arr.shape}")
    return AudioClip(arr, sample_rate)


def check_magnitude(m) -> np.ndarray:
    values = m.values if isinstance(m, MagSpectrogram) else np.asarray(m, dtype=np.float32)
    if values.ndim != 2 or values.shape[1] != N_BINS:
        raise DataError(f"expected a [frames, {N_BINS}] magnitude spectrogram, got {values.shape}")
    if not np.all(np.isfinite(values)) or (values < 0).any():
        raise DataError("magnitudes must be finite and non-negative")
    return values


def check_features(x) -> np.ndarray:
    values = x.values if isinstance(x, VocoderFeatures) else np.asarray(x, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != N_FEATURES:
        raise DataError(f"expected [frames, {N_FEATURES}] vocoder features, got {values.shape}")
    if not np.all(np.isfinite(values)):
        raise DataError("features must be finite")
    return values


def check_singer(singer_id, n_singers):
    if singer_id is None:
        return None
    if isinstance(singer_id, (bool, np.bool_)) or not isinstance(singer_id, (int, np.integer)):
        raise UsageError(f"singer id must be an integer index, got {singer_id!r}")
    if not 0 <= singer_id < n_singers:
        raise UsageError(f"singer id {singer_id} out of range for {n_singers} singers")
    return int(singer_id)


def check_choice(name, value, choices):
    if value not in choices:
        raise UsageError(f"{name} must be one of {tuple(choices)}, got {value!r}")
    return value
