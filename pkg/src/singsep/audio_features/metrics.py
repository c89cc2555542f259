import numpy as np

from ..exceptions import DataError
from .types import N_CEPSTRUM, VocoderFeatures

MCD_SCALE = 10.0 / np.log(10.0)


def mcd_frames(ref, est) -> np.ndarray:
    """Per-frame mel cepstral distortion in dB over cepstral dims 1-59.

    The energy coefficient (dim 0) and the aperiodicity dims are excluded.
    """
    ref = ref.values if isinstance(ref, VocoderFeatures) else np.asarray(ref)
    est = est.values if isinstance(est, VocoderFeatures) else np.asarray(est)
    if ref.shape != est.shape:
        raise DataError(f"MCD needs equal shapes, got {ref.shape} and {est.shape}")
    diff = ref[:, 1:N_CEPSTRUM].astype(np.float64) - est[:, 1:N_CEPSTRUM].astype(np.float64)
    return MCD_SCALE * np.sqrt(2.0 * np.sum(diff**2, axis=1))


def mcd(ref, est):
    """Return ``(mean_db, std_db)`` of the per-frame distortion."""
    per_frame = mcd_frames(ref, est)
    if per_frame.size == 0:
        raise DataError("MCD of an empty feature sequence")
    return float(per_frame.mean()), float(per_frame.std())
