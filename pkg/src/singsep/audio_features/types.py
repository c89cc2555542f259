"""Container types shared by the signal-processing layer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SAMPLE_RATE = 32000
HOP_SIZE = 160  # 5 ms at 32 kHz
WINDOW_SIZE = 1024
N_BINS = WINDOW_SIZE // 2 + 1
N_CEPSTRUM = 60
N_APERIODICITY = 4
N_FEATURES = N_CEPSTRUM + N_APERIODICITY
FEATURE_LAYOUT = "mcep60+bap4"

F0_MIN = 65.4  # C2
F0_MAX = 1046.5  # C6
F0_BINS = 255


@dataclass
class AudioClip:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError(f"AudioClip must be mono, got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("AudioClip contains non-finite samples")

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    @property
    def n_frames(self) -> int:
        return len(self.samples) // HOP_SIZE


@dataclass
class MagSpectrogram:
    values: np.ndarray
    hop: float = HOP_SIZE / SAMPLE_RATE
    window_size: int = WINDOW_SIZE

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 2 or self.values.shape[1] != self.window_size // 2 + 1:
            raise ValueError(
                f"MagSpectrogram expects [frames x {self.window_size // 2 + 1}], "
                f"got {self.values.shape}"
            )

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]


@dataclass
class VocoderFeatures:
    """Per-frame compressed vocoder parameters.

    Columns 0-59 hold the frequency-warped cepstrum of the spectral envelope
    (column 0 is the energy term), columns 60-63 hold band aperiodicity in dB.
    """

    values: np.ndarray
    layout: str = FEATURE_LAYOUT

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 2 or self.values.shape[1] != N_FEATURES:
            raise ValueError(f"VocoderFeatures expects [frames x 64], got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("VocoderFeatures contains non-finite values")

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def cepstrum(self) -> np.ndarray:
        return self.values[:, :N_CEPSTRUM]

    @property
    def aperiodicity(self) -> np.ndarray:
        return self.values[:, N_CEPSTRUM:]


@dataclass
class F0Contour:
    """Pitch track in one of two encodings.

    ``mode="continuous"``: ``values`` are log-frequency positions in [0, 1]
    between ``fmin`` and ``fmax``. ``mode="discrete"``: ``values`` are integer
    classes, 0 meaning unvoiced and 1..n_bins log-spaced pitch bins.
    """

    values: np.ndarray
    voiced: np.ndarray
    mode: str = "continuous"
    fmin: float = F0_MIN
    fmax: float = F0_MAX
    n_bins: int = F0_BINS
    probabilities: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.mode not in ("continuous", "discrete"):
            raise ValueError(f"unknown F0 mode {self.mode!r}")
        self.voiced = np.asarray(self.voiced, dtype=bool)
        if self.mode == "continuous":
            self.values = np.asarray(self.values, dtype=np.float64)
        else:
            self.values = np.asarray(self.values, dtype=np.int64)
        if self.values.shape != self.voiced.shape or self.values.ndim != 1:
            raise ValueError("F0Contour values and voiced flags must be 1-D and equal length")

    @property
    def n_frames(self) -> int:
        return len(self.values)

    def to_hz(self) -> np.ndarray:
        from .pitch import f0_denormalize, f0_dequantize

        if self.mode == "continuous":
            return f0_denormalize(self)
        return f0_dequantize(self)
