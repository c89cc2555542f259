import numpy as np

from ..exceptions import AnalysisError, DataError, ResampleRequiredError
from . import codec
from .pitch import f0_normalize
from .types import HOP_SIZE, SAMPLE_RATE, AudioClip, F0Contour, VocoderFeatures
from .vocoder import default_backend


def vocoder_analyze(clip: AudioClip, backend=None):
    """Analyze a clean vocal into 64-dim features and a continuous F0 contour.

    Frame counts match ``stft_magnitude`` for the same clip.
    """
    backend = backend or default_backend()
    if clip.sample_rate != SAMPLE_RATE:
        raise ResampleRequiredError(
            f"expected {SAMPLE_RATE} Hz audio, got {clip.sample_rate} Hz; resample first"
        )
    n_frames = len(clip) // HOP_SIZE
    if n_frames < 1:
        raise DataError(f"clip of {len(clip)} samples is shorter than one hop ({HOP_SIZE})")
    try:
        f0, envelope, ap = backend.analyze(clip.samples, clip.sample_rate, n_frames)
        values = codec.encode(envelope, ap, clip.sample_rate)
    except Exception as exc:  # surface any backend failure under one error type
        raise AnalysisError(getattr(backend, "name", type(backend).__name__), str(exc)) from exc
    if values.shape != (n_frames, 64) or not np.all(np.isfinite(values)):
        raise AnalysisError(backend.name, f"bad feature matrix of shape {values.shape}")
    return VocoderFeatures(values), f0_normalize(f0)


def vocoder_synthesize(feats: VocoderFeatures, f0, backend=None) -> AudioClip:
    """Render features plus pitch to audio of exactly ``n_frames * 160`` samples.

    ``f0`` is an ``F0Contour`` (either mode) or a per-frame array in Hz.
    """
    backend = backend or default_backend()
    f0_hz = f0.to_hz() if isinstance(f0, F0Contour) else np.asarray(f0, dtype=np.float64)
    if len(f0_hz) != feats.n_frames:
        raise DataError(
            f"frame-count mismatch: {feats.n_frames} feature frames vs {len(f0_hz)} f0 frames"
        )
    n_bins = backend.fft_size // 2 + 1
    envelope, ap = codec.decode(feats.values, n_bins, SAMPLE_RATE)
    samples = backend.synthesize(f0_hz, envelope, ap, SAMPLE_RATE)
    return AudioClip(samples, SAMPLE_RATE)
