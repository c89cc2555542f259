"""Source-filter vocoder: analysis to (f0, envelope, aperiodicity) and back.

The backend works on full-resolution spectra; ``codec`` compresses them to the
64-dimensional feature vectors the networks consume. Any object exposing the
``VocoderBackend`` methods can be swapped in.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .types import F0_MAX, F0_MIN, HOP_SIZE, SAMPLE_RATE

_CHUNK = 512


class VocoderBackend(Protocol):
    name: str
    fft_size: int

    def analyze(self, x: np.ndarray, fs: int, n_frames: int):
        """Return ``(f0_hz [n], envelope [n, fft/2+1], aperiodicity [n, fft/2+1])``."""

    def synthesize(self, f0_hz, envelope, aperiodicity, fs: int) -> np.ndarray:
        """Return ``n * hop`` samples."""


def frame_centers(n_frames: int, hop: int = HOP_SIZE) -> np.ndarray:
    # frame k drives output samples [k*hop, (k+1)*hop)
    return np.arange(n_frames) * hop + hop // 2


def _segments(x, centers, length, pad):
    """Rows of ``length`` samples centered on ``centers`` (zero beyond the clip)."""
    padded = np.pad(x, (pad, pad))
    starts = centers - length // 2 + pad
    return sliding_window_view(padded, length)[starts]


def yin(
    x,
    fs,
    centers,
    fmin=F0_MIN,
    fmax=F0_MAX,
    integration=640,
    threshold=0.15,
    voicing_threshold=0.3,
    silence_db=-70.0,
):
    """Frame-wise YIN pitch estimate; 0 marks unvoiced frames."""
    tau_min = int(np.floor(fs / fmax))
    tau_max = int(np.ceil(fs / fmin)) + 1
    length = integration + tau_max + 1
    nfft = 1 << int(np.ceil(np.log2(length + integration)))
    pad = length + HOP_SIZE
    silence = 10.0 ** (silence_db / 10.0)
    f0 = np.zeros(len(centers))

    for lo in range(0, len(centers), _CHUNK):
        seg = _segments(x, centers[lo : lo + _CHUNK], length, pad)
        head = seg[:, :integration]
        r = np.fft.irfft(
            np.fft.rfft(seg, nfft) * np.conj(np.fft.rfft(head, nfft)), nfft
        )[:, : tau_max + 2]
        cs = np.concatenate([np.zeros((len(seg), 1)), np.cumsum(seg**2, axis=1)], axis=1)
        taus = np.arange(tau_max + 2)
        e0 = cs[:, integration][:, None]
        et = cs[:, taus + integration] - cs[:, taus]
        d = np.maximum(e0 + et - 2.0 * r, 0.0)
        running = np.cumsum(d[:, 1:], axis=1)
        cmnd = np.ones_like(d)
        cmnd[:, 1:] = d[:, 1:] * taus[1:] / np.maximum(running, 1e-300)
        power = e0[:, 0] / integration

        search = cmnd[:, tau_min : tau_max + 1]
        below = search < threshold
        for i in range(len(seg)):
            if power[i] < silence:
                continue
            if below[i].any():
                t = int(np.argmax(below[i])) + tau_min
                while t < tau_max and cmnd[i, t + 1] < cmnd[i, t]:
                    t += 1
            else:
                t = int(np.argmin(search[i])) + tau_min
            if cmnd[i, t] >= voicing_threshold:
                continue
            a, b, c = d[i, t - 1], d[i, t], d[i, t + 1]
            denom = a - 2 * b + c
            shift = 0.5 * (a - c) / denom if denom > 0 else 0.0
            period = t + float(np.clip(shift, -1.0, 1.0))
            f0[lo + i] = fs / period
    return np.where((f0 >= fmin * 0.97) & (f0 <= fmax * 1.03), np.clip(f0, fmin, fmax), 0.0)


def _hann_windows(lengths, nfft):
    t = (np.arange(nfft) - nfft // 2)[None, :] / lengths[:, None]
    return np.where(np.abs(t) < 0.5, 0.5 + 0.5 * np.cos(2 * np.pi * t), 0.0)


def _periodogram(x, centers, lengths, nfft, pad):
    seg = _segments(x, centers, nfft, pad)
    win = _hann_windows(lengths, nfft)
    spec = np.abs(np.fft.rfft(seg * win, axis=1)) ** 2
    return spec / np.sum(win**2, axis=1, keepdims=True)


def _smooth(power, width_bins, margin):
    """Rectangular smoothing of each row over a fractional width, mirrored at the edges."""
    n, nb = power.shape
    ext = np.concatenate([power[:, margin:0:-1], power, power[:, -2 : -margin - 2 : -1]], axis=1)
    edges = np.concatenate([np.zeros((n, 1)), np.cumsum(ext, axis=1)], axis=1)

    def integral(pos):
        pos = np.clip(pos, 0, edges.shape[1] - 1.000001)
        base = np.floor(pos).astype(int)
        frac = pos - base
        lo = np.take_along_axis(edges, base, axis=1)
        hi = np.take_along_axis(edges, base + 1, axis=1)
        return lo + frac * (hi - lo)

    centers = np.arange(nb)[None, :] + margin + 0.5
    half = width_bins[:, None] / 2.0
    return (integral(centers + half) - integral(centers - half)) / width_bins[:, None]


def _minimum_phase(log_mag, nfft):
    cep = np.fft.irfft(log_mag, nfft, axis=1)
    fold = np.zeros_like(cep)
    fold[:, 0] = cep[:, 0]
    fold[:, 1 : nfft // 2] = 2.0 * cep[:, 1 : nfft // 2]
    fold[:, nfft // 2] = cep[:, nfft // 2]
    return np.exp(np.fft.rfft(fold, axis=1))


class PulseNoiseVocoder:
    """Reference backend.

    Analysis: YIN pitch, an F0-adaptive (three-period Hann, F0-wide smoothing)
    power envelope normalized as a power spectral density, and aperiodicity
    from inter-harmonic valleys of a four-period Hann spectrum, where
    harmonic leakage is nulled. Synthesis: a pulse train of amplitude
    ``sqrt(T0)`` plus unit white noise, each shaped per frame by a
    minimum-phase filter and overlap-added.
    """

    name = "pulse-noise"

    def __init__(self, fft_size=4096, fmin=F0_MIN, fmax=F0_MAX, unvoiced_f0=500.0, seed=0):
        self.fft_size = fft_size
        self.fmin = fmin
        self.fmax = fmax
        self.unvoiced_f0 = unvoiced_f0
        self.seed = seed

    def analyze(self, x, fs, n_frames):
        x = np.asarray(x, dtype=np.float64)
        nfft = self.fft_size
        centers = frame_centers(n_frames)
        f0 = yin(x, fs, centers, self.fmin, self.fmax)
        nb = nfft // 2 + 1
        envelope = np.empty((n_frames, nb))
        aperiodicity = np.ones((n_frames, nb))
        margin = int(np.ceil(max(self.fmax, self.unvoiced_f0) * nfft / fs)) + 2
        freqs = np.arange(nb) * fs / nfft

        for lo in range(0, n_frames, _CHUNK):
            sl = slice(lo, lo + _CHUNK)
            c, f = centers[sl], f0[sl]
            voiced = f > 0
            f_eff = np.where(voiced, f, self.unvoiced_f0)
            width = f_eff * nfft / fs
            p3 = _periodogram(x, c, 3.0 * fs / f_eff, nfft, nfft)
            envelope[sl] = _smooth(p3, width, margin)

            if voiced.any():
                rows = np.flatnonzero(voiced)
                p4 = _periodogram(x, c[rows], 4.0 * fs / f[rows], nfft, nfft)
                total = _smooth(p4, width[rows], margin)
                for j, row in enumerate(rows):
                    valleys = np.arange(0.5, fs / 2 / f[row], 1.0) * f[row]
                    noise = np.interp(freqs, valleys, np.interp(valleys, freqs, p4[j]))
                    aperiodicity[lo + row] = noise / np.maximum(total[j], 1e-300)
        return f0, envelope, np.clip(aperiodicity, 1e-6, 1.0)

    def synthesize(self, f0_hz, envelope, aperiodicity, fs):
        f0_hz = np.asarray(f0_hz, dtype=np.float64)
        n = len(f0_hz)
        nfft = self.fft_size
        nb = nfft // 2 + 1
        hop = HOP_SIZE
        n_samples = n * hop
        rng = np.random.default_rng(self.seed)

        pulse_t, pulse_a = _pulse_times(f0_hz, fs, hop)
        # frame k windows samples [k*hop - hop/2, k*hop + 3*hop/2); periodic Hann
        # of length 2*hop overlap-adds to one at hop spacing
        k_hi = np.floor((pulse_t + hop // 2) / hop).astype(int)
        u_hi = pulse_t - (k_hi * hop - hop // 2)
        pulse_frame = np.concatenate([k_hi, k_hi - 1])
        pulse_offset = np.concatenate([u_hi, u_hi + hop])
        pulse_gain = np.tile(pulse_a, 2) * (0.5 - 0.5 * np.cos(np.pi * pulse_offset / hop))
        keep = (pulse_frame >= 0) & (pulse_frame < n)
        pulse_frame, pulse_offset, pulse_gain = pulse_frame[keep], pulse_offset[keep], pulse_gain[keep]
        order = np.argsort(pulse_frame, kind="stable")
        pulse_frame, pulse_offset, pulse_gain = pulse_frame[order], pulse_offset[order], pulse_gain[order]

        win = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(2 * hop) / (2 * hop))
        offset = hop // 2
        noise = np.pad(rng.standard_normal(n_samples), (offset, 2 * hop))
        out = np.zeros(n_samples + offset + nfft + 2 * hop)
        bins = np.arange(nb)
        voiced = f0_hz > 0
        floor = 1e-20
        for lo in range(0, n, _CHUNK):
            idx = np.arange(lo, min(lo + _CHUNK, n))
            starts = idx * hop  # window start in padded coordinates
            seg_n = sliding_window_view(noise, 2 * hop)[starts] * win
            excitation = np.zeros((len(idx), nb), dtype=np.complex128)
            a, b = np.searchsorted(pulse_frame, [idx[0], idx[-1] + 1])
            if b > a:
                phasor = np.exp(-2j * np.pi * np.outer(pulse_offset[a:b], bins) / nfft)
                np.add.at(excitation, pulse_frame[a:b] - lo, pulse_gain[a:b, None] * phasor)
            env = np.maximum(envelope[idx], floor)
            ap = np.where(voiced[idx, None], np.clip(aperiodicity[idx], 0.0, 1.0), 1.0)
            hp = _minimum_phase(0.5 * np.log(np.maximum(env * (1.0 - ap), floor)), nfft)
            hn = _minimum_phase(0.5 * np.log(np.maximum(env * ap, floor)), nfft)
            frames = np.fft.irfft(excitation * hp + np.fft.rfft(seg_n, nfft, axis=1) * hn, nfft, axis=1)
            for row, start in zip(frames, starts):
                out[start : start + nfft] += row
        return out[offset : offset + n_samples]


def _pulse_times(f0_hz, fs, hop):
    """Fractional glottal pulse positions and their ``sqrt(T0)`` amplitudes."""
    n = len(f0_hz)
    n_samples = n * hop
    voiced = f0_hz > 0
    if not voiced.any():
        return np.zeros(0), np.zeros(0)
    centers = frame_centers(n, hop)
    f0_track = np.interp(np.arange(n_samples), centers[voiced], f0_hz[voiced])
    active = np.repeat(voiced, hop)
    phase = np.cumsum(np.where(active, f0_track / fs, 0.0))
    cycle = np.floor(phase)
    at = np.flatnonzero(np.diff(cycle, prepend=0.0) > 0)
    at = at[active[at]]
    prev = np.where(at > 0, phase[np.maximum(at - 1, 0)], 0.0)
    frac = (cycle[at] - prev) / np.maximum(phase[at] - prev, 1e-12)
    times = at - 1 + np.clip(frac, 0.0, 1.0)
    return times, np.sqrt(fs / f0_track[at])


_DEFAULT = PulseNoiseVocoder()


def default_backend() -> PulseNoiseVocoder:
    return _DEFAULT


__all__ = ["VocoderBackend", "PulseNoiseVocoder", "default_backend", "yin", "frame_centers", "SAMPLE_RATE"]
