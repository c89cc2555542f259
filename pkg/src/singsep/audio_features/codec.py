"""Compression of full-resolution vocoder parameters to 64 features.

The envelope becomes a 60-term frequency-warped cepstrum of the log
amplitude, ``log|H(w)| = c0 + 2 * sum_m c_m cos(m * warp(w))``, and the
aperiodicity collapses to four band averages in dB.
"""

from functools import lru_cache

import numpy as np

from .types import N_APERIODICITY, N_CEPSTRUM, SAMPLE_RATE

ALPHA = 0.5
BAND_EDGES_HZ = (0.0, 2000.0, 4000.0, 8000.0, 16000.0)
AP_FLOOR_DB = -60.0
POWER_FLOOR = 1e-10
_GRID = 1024


def warp(omega, alpha=ALPHA):
    """First-order all-pass frequency warping of ``omega`` in [0, pi]."""
    return omega + 2.0 * np.arctan(alpha * np.sin(omega) / (1.0 - alpha * np.cos(omega)))


@lru_cache(maxsize=8)
def _analysis_basis(n_bins, order, alpha):
    warped = np.pi * (np.arange(_GRID) + 0.5) / _GRID
    linear = warp(warped, -alpha)
    # midpoint-rule projection onto cos(m * warped); exact for the truncated series
    basis = np.cos(np.outer(warped, np.arange(order))) / _GRID
    positions = linear / np.pi * (n_bins - 1)
    return positions, basis


@lru_cache(maxsize=8)
def _synthesis_basis(n_bins, order, alpha):
    omega = np.linspace(0.0, np.pi, n_bins)
    scale = np.full(order, 2.0)
    scale[0] = 1.0
    return np.cos(np.outer(warp(omega, alpha), np.arange(order))) * scale


def encode_envelope(power, order=N_CEPSTRUM, alpha=ALPHA):
    power = np.asarray(power, dtype=np.float64)
    n_bins = power.shape[1]
    positions, basis = _analysis_basis(n_bins, order, alpha)
    log_amp = 0.5 * np.log(np.maximum(power, POWER_FLOOR))
    grid = np.arange(n_bins)
    sampled = np.stack([np.interp(positions, grid, row) for row in log_amp])
    return sampled @ basis


def decode_envelope(cepstrum, n_bins, alpha=ALPHA):
    cepstrum = np.asarray(cepstrum, dtype=np.float64)
    basis = _synthesis_basis(n_bins, cepstrum.shape[1], alpha)
    return np.exp(2.0 * (cepstrum @ basis.T))


def _band_masks(n_bins, fs):
    freqs = np.linspace(0.0, fs / 2.0, n_bins)
    edges = np.asarray(BAND_EDGES_HZ)
    masks = [(freqs >= lo) & (freqs < hi) for lo, hi in zip(edges[:-1], edges[1:])]
    masks[-1] |= freqs >= edges[-1]
    return freqs, masks


def encode_aperiodicity(ap, fs=SAMPLE_RATE, weights=None):
    """Band aperiodicity in dB; ``weights`` (the envelope) power-weights each band."""
    ap = np.asarray(ap, dtype=np.float64)
    w = np.ones_like(ap) if weights is None else np.maximum(np.asarray(weights), POWER_FLOOR)
    _, masks = _band_masks(ap.shape[1], fs)
    bands = np.stack(
        [(ap[:, m] * w[:, m]).sum(axis=1) / w[:, m].sum(axis=1) for m in masks], axis=1
    )
    return np.clip(10.0 * np.log10(np.maximum(bands, 1e-12)), AP_FLOOR_DB, 0.0)


def decode_aperiodicity(bands_db, n_bins, fs=SAMPLE_RATE):
    bands_db = np.asarray(bands_db, dtype=np.float64)
    freqs, _ = _band_masks(n_bins, fs)
    edges = np.asarray(BAND_EDGES_HZ)
    centers = 0.5 * (edges[:-1] + edges[1:])
    db = np.stack([np.interp(freqs, centers, row) for row in bands_db])
    return 10.0 ** (np.minimum(db, 0.0) / 10.0)


def encode(envelope, aperiodicity, fs=SAMPLE_RATE):
    return np.concatenate([encode_envelope(envelope), encode_aperiodicity(aperiodicity, fs, envelope)], axis=1)


def decode(features, n_bins, fs=SAMPLE_RATE):
    features = np.asarray(features, dtype=np.float64)
    return (
        decode_envelope(features[:, :N_CEPSTRUM], n_bins),
        decode_aperiodicity(features[:, N_CEPSTRUM : N_CEPSTRUM + N_APERIODICITY], n_bins, fs),
    )
