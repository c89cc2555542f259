"""F0 representations: log-normalized continuous values and quantized classes."""

import numpy as np

from ..exceptions import UsageError
from .types import F0_BINS, F0_MAX, F0_MIN, F0Contour


def _check_range(fmin, fmax):
    if fmin <= 0:
        raise UsageError(f"fmin must be positive, got {fmin}")
    if fmin >= fmax:
        raise UsageError(f"fmin ({fmin}) must be below fmax ({fmax})")


def f0_normalize(f0_hz, fmin: float = F0_MIN, fmax: float = F0_MAX) -> F0Contour:
    _check_range(fmin, fmax)
    f0_hz = np.asarray(f0_hz, dtype=np.float64)
    voiced = f0_hz > 0
    values = np.zeros_like(f0_hz)
    span = np.log(fmax) - np.log(fmin)
    values[voiced] = np.clip((np.log(f0_hz[voiced]) - np.log(fmin)) / span, 0.0, 1.0)
    return F0Contour(values, voiced, mode="continuous", fmin=fmin, fmax=fmax)


def f0_denormalize(contour: F0Contour) -> np.ndarray:
    span = np.log(contour.fmax) - np.log(contour.fmin)
    hz = np.exp(np.log(contour.fmin) + np.clip(contour.values, 0.0, 1.0) * span)
    return np.where(contour.voiced, hz, 0.0)


def bin_centers(n_bins: int = F0_BINS, fmin: float = F0_MIN, fmax: float = F0_MAX) -> np.ndarray:
    """Center frequencies of classes 1..n_bins (class 0 is unvoiced)."""
    return np.exp(np.linspace(np.log(fmin), np.log(fmax), n_bins))


def bin_width_cents(n_bins: int = F0_BINS, fmin: float = F0_MIN, fmax: float = F0_MAX) -> float:
    return 1200.0 * np.log2(fmax / fmin) / (n_bins - 1)


def f0_quantize(
    f0_hz, n_bins: int = F0_BINS, fmin: float = F0_MIN, fmax: float = F0_MAX
) -> F0Contour:
    if n_bins < 2:
        raise UsageError(f"n_bins must be at least 2, got {n_bins}")
    norm = f0_normalize(f0_hz, fmin, fmax)
    classes = np.where(norm.voiced, 1 + np.rint(norm.values * (n_bins - 1)), 0)
    return F0Contour(
        classes.astype(np.int64), norm.voiced, mode="discrete", fmin=fmin, fmax=fmax, n_bins=n_bins
    )


def f0_dequantize(contour: F0Contour) -> np.ndarray:
    centers = np.concatenate([[0.0], bin_centers(contour.n_bins, contour.fmin, contour.fmax)])
    classes = np.clip(contour.values, 0, contour.n_bins)
    return np.where(contour.voiced & (classes > 0), centers[classes], 0.0)


def cents(f_est, f_ref) -> np.ndarray:
    return 1200.0 * np.log2(np.asarray(f_est, dtype=np.float64) / np.asarray(f_ref, dtype=np.float64))
