import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from ..exceptions import DataError, ResampleRequiredError
from .types import HOP_SIZE, SAMPLE_RATE, WINDOW_SIZE, AudioClip, MagSpectrogram


def frame_count(n_samples: int, hop: int = HOP_SIZE) -> int:
    return n_samples // hop


def stft_magnitude(clip: AudioClip, dtype=np.float64) -> MagSpectrogram:
    """Hann-windowed STFT magnitude on the 5 ms frame grid.

    Frame ``k`` starts at sample ``k * 160`` and the clip end is
    reflect-padded, so a clip of N samples yields ``N // 160`` frames.
    """
    if clip.sample_rate != SAMPLE_RATE:
        raise ResampleRequiredError(
            f"expected {SAMPLE_RATE} Hz audio, got {clip.sample_rate} Hz; resample first"
        )
    n_frames = frame_count(len(clip))
    if n_frames < 1:
        raise DataError(f"clip of {len(clip)} samples is shorter than one hop ({HOP_SIZE})")
    x = clip.samples
    padded = np.pad(x, (0, WINDOW_SIZE), mode="reflect" if len(x) > 1 else "constant")
    frames = sliding_window_view(padded, WINDOW_SIZE)[: n_frames * HOP_SIZE : HOP_SIZE]
    window = get_window("hann", WINDOW_SIZE)
    mag = np.abs(np.fft.rfft(frames * window, axis=-1))
    return MagSpectrogram(mag.astype(dtype, copy=False))
