from .analysis import vocoder_analyze, vocoder_synthesize
from .io import load_feature_dump, load_wav, save_feature_dump, save_wav
from .metrics import mcd, mcd_frames
from .pitch import f0_denormalize, f0_dequantize, f0_normalize, f0_quantize
from .stft import stft_magnitude
from .types import (
    F0_BINS,
    F0_MAX,
    F0_MIN,
    HOP_SIZE,
    N_BINS,
    N_FEATURES,
    SAMPLE_RATE,
    WINDOW_SIZE,
    AudioClip,
    F0Contour,
    MagSpectrogram,
    VocoderFeatures,
)
from .vocoder import PulseNoiseVocoder, VocoderBackend

__all__ = [
    "AudioClip",
    "F0Contour",
    "MagSpectrogram",
    "VocoderFeatures",
    "PulseNoiseVocoder",
    "VocoderBackend",
    "stft_magnitude",
    "vocoder_analyze",
    "vocoder_synthesize",
    "f0_normalize",
    "f0_denormalize",
    "f0_quantize",
    "f0_dequantize",
    "mcd",
    "mcd_frames",
    "load_wav",
    "save_wav",
    "load_feature_dump",
    "save_feature_dump",
    "SAMPLE_RATE",
    "HOP_SIZE",
    "WINDOW_SIZE",
    "N_BINS",
    "N_FEATURES",
    "F0_MIN",
    "F0_MAX",
    "F0_BINS",
]
