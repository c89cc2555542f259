"""Feature extraction cache, gain-augmented mixing and excerpt sampling."""

from __future__ import annotations

import hashlib
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..audio_features import (
    AudioClip,
    MagSpectrogram,
    load_feature_dump,
    load_wav,
    save_feature_dump,
    stft_magnitude,
    vocoder_analyze,
)
from ..audio_features.pitch import f0_normalize, f0_quantize
from ..audio_features.types import F0_BINS, HOP_SIZE, WINDOW_SIZE
from ..exceptions import DataError, UsageError
from .manifest import DatasetManifest

logger = logging.getLogger(__name__)

EXCERPT_FRAMES = 128  # 640 ms at 5 ms hop
DEFAULT_GAIN_RANGE = (0.5, 1.2)


def singer_vector(index: int, n_singers: int) -> np.ndarray:
    if not 0 <= index < n_singers:
        raise UsageError(f"singer index {index} out of range for {n_singers} singers")
    onehot = np.zeros(n_singers, dtype=np.float32)
    onehot[index] = 1.0
    return onehot


def mix_with_gains(vocal_mag, backing_mag, g_v: float, g_b: float):
    """Magnitude-domain mixture ``g_v * vocal + g_b * backing``."""
    wrap = isinstance(vocal_mag, MagSpectrogram)
    v = vocal_mag.values if wrap else np.asarray(vocal_mag)
    b = backing_mag.values if isinstance(backing_mag, MagSpectrogram) else np.asarray(backing_mag)
    if v.shape != b.shape:
        raise DataError(f"cannot mix spectrograms of shapes {v.shape} and {b.shape}")
    if g_v < 0 or g_b < 0:
        raise UsageError(f"gains must be non-negative, got {g_v}, {g_b}")
    mixed = g_v * v + g_b * b
    return MagSpectrogram(mixed) if wrap else mixed


@dataclass
class SongData:
    song_id: str
    singer: int
    vocal_mag: np.ndarray  # [F, 513]
    backing_mag: np.ndarray  # [F, 513], zeros when the song has no backing
    features: np.ndarray  # [F, 64] from the clean vocal
    f0_hz: np.ndarray  # [F]
    vocal: np.ndarray = field(repr=False, default=None)
    backing: np.ndarray = field(repr=False, default=None)

    @property
    def n_frames(self) -> int:
        return len(self.features)

    def mixture(self, g_v: float = 1.0, g_b: float = 1.0) -> AudioClip:
        """Waveform-domain mixture of the full song."""
        return AudioClip(g_v * self.vocal.astype(np.float64) + g_b * self.backing.astype(np.float64))


def _cache_key(entry) -> str:
    h = hashlib.sha1()
    for path in (entry.vocal_path, entry.backing_path):
        if path:
            st = os.stat(path)
            h.update(f"{os.path.abspath(path)}:{st.st_size}:{st.st_mtime_ns}".encode())
    return f"{entry.song_id}-{h.hexdigest()[:12]}"


def load_song(entry, singer: int, cache_dir=None) -> SongData:
    vocal = load_wav(entry.vocal_path)
    backing = load_wav(entry.backing_path) if entry.backing_path else AudioClip(np.zeros(len(vocal)))
    n = min(len(vocal), len(backing))
    vocal, backing = AudioClip(vocal.samples[:n]), AudioClip(backing.samples[:n])

    arrays = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"{_cache_key(entry)}.ssfd"
        if path.exists():
            packed, _ = load_feature_dump(path, expect_layout="song-cache-v1")
            arrays = packed
    if arrays is None:
        feats, f0 = vocoder_analyze(vocal)
        vm = stft_magnitude(vocal).values
        bm = stft_magnitude(backing).values if entry.backing_path else np.zeros_like(vm)
        f0_hz = f0.to_hz()
        arrays = np.concatenate([vm, bm, feats.values, f0_hz[:, None]], axis=1).astype(np.float32)
        if cache_dir is not None:
            Path(cache_dir).mkdir(parents=True, exist_ok=True)
            save_feature_dump(path, arrays, layout="song-cache-v1")
    nb = WINDOW_SIZE // 2 + 1
    return SongData(
        song_id=entry.song_id,
        singer=singer,
        vocal_mag=arrays[:, :nb],
        backing_mag=arrays[:, nb : 2 * nb],
        features=arrays[:, 2 * nb : 2 * nb + 64],
        f0_hz=arrays[:, 2 * nb + 64],
        vocal=vocal.samples.astype(np.float32),
        backing=backing.samples.astype(np.float32),
    )


def load_corpus(manifest: DatasetManifest, splits=("train", "val", "test"), cache_dir=None):
    """Return ``{split: [SongData, ...]}`` for the requested splits."""
    out = {}
    for split in splits:
        out[split] = [load_song(e, manifest.singer_of(e), cache_dir) for e in manifest.split(split)]
    return out


@dataclass
class TrainingBatch:
    mixture_mag: np.ndarray  # [B, T, 513]
    vocal_features: np.ndarray  # [B, T, 64]
    f0_hz: np.ndarray  # [B, T]
    singers: np.ndarray  # [B] singer indices
    n_singers: int
    song_ids: list = field(default_factory=list)
    starts: np.ndarray = None
    gains: np.ndarray = None  # [B, 2]

    def __len__(self):
        return len(self.singers)

    @property
    def singer_onehot(self) -> np.ndarray:
        return np.stack([singer_vector(int(s), self.n_singers) for s in self.singers])

    def f0_continuous(self, fmin=None, fmax=None):
        kw = {} if fmin is None else {"fmin": fmin, "fmax": fmax}
        norm = f0_normalize(self.f0_hz.ravel(), **kw)
        return norm.values.reshape(self.f0_hz.shape), norm.voiced.reshape(self.f0_hz.shape)

    def f0_classes(self, n_bins=F0_BINS, fmin=None, fmax=None):
        kw = {} if fmin is None else {"fmin": fmin, "fmax": fmax}
        return f0_quantize(self.f0_hz.ravel(), n_bins, **kw).values.reshape(self.f0_hz.shape)


def _excerpt_mixture(song, start, frames, g_v, g_b, mixing):
    sl = slice(start, start + frames)
    if mixing == "magnitude":
        return mix_with_gains(song.vocal_mag[sl], song.backing_mag[sl], g_v, g_b)
    if mixing == "waveform":
        lo = start * HOP_SIZE
        hi = (start + frames) * HOP_SIZE + WINDOW_SIZE - HOP_SIZE
        wave = g_v * song.vocal[lo:hi].astype(np.float64) + g_b * song.backing[lo:hi].astype(np.float64)
        wave = np.pad(wave, (0, hi - lo - len(wave)))
        return stft_magnitude(AudioClip(wave)).values[:frames].astype(np.float32)
    raise UsageError(f"unknown mixing mode {mixing!r}")


def eligible(songs, frames=EXCERPT_FRAMES):
    keep = [s for s in songs if s.n_frames >= frames]
    for s in songs:
        if s.n_frames < frames:
            logger.warning("skipping %s: %d frames is shorter than a %d-frame excerpt",
                           s.song_id, s.n_frames, frames)
    return keep


def sample_training_batch(songs, batch_size: int, gain_range=DEFAULT_GAIN_RANGE, rng=None,
                          n_singers: int | None = None, excerpt_frames: int = EXCERPT_FRAMES,
                          mixing: str = "magnitude") -> TrainingBatch:
    """Random excerpts with per-example gains drawn uniformly from ``gain_range``.

    Targets come from the clean vocal and never depend on the gains.
    """
    rng = rng if rng is not None else np.random.default_rng()
    pool = eligible(songs, excerpt_frames)
    if not pool:
        raise DataError(f"no song has at least {excerpt_frames} frames")
    lo, hi = gain_range
    n_singers = n_singers or (max(s.singer for s in songs) + 1)
    mix, feats, f0, singers, ids, starts, gains = [], [], [], [], [], [], []
    for _ in range(batch_size):
        song = pool[rng.integers(len(pool))]
        start = int(rng.integers(0, song.n_frames - excerpt_frames + 1))
        g_v, g_b = rng.uniform(lo, hi, size=2)
        sl = slice(start, start + excerpt_frames)
        mix.append(_excerpt_mixture(song, start, excerpt_frames, g_v, g_b, mixing))
        feats.append(song.features[sl])
        f0.append(song.f0_hz[sl])
        singers.append(song.singer)
        ids.append(song.song_id)
        starts.append(start)
        gains.append((g_v, g_b))
    return TrainingBatch(
        np.stack(mix).astype(np.float32),
        np.stack(feats).astype(np.float32),
        np.stack(f0).astype(np.float32),
        np.asarray(singers, dtype=np.int64),
        n_singers,
        ids,
        np.asarray(starts),
        np.asarray(gains),
    )


def fixed_batches(songs, batch_size: int, n_singers: int, gains=(1.0, 1.0),
                  excerpt_frames: int = EXCERPT_FRAMES, mixing: str = "magnitude"):
    """Deterministic batches of non-overlapping excerpts, used for validation."""
    items = [(s, start) for s in eligible(songs, excerpt_frames)
             for start in range(0, s.n_frames - excerpt_frames + 1, excerpt_frames)]
    batches = []
    for i in range(0, len(items), batch_size):
        chunk = items[i : i + batch_size]
        sl = [slice(st, st + excerpt_frames) for _, st in chunk]
        batches.append(
            TrainingBatch(
                np.stack([_excerpt_mixture(s, st, excerpt_frames, *gains, mixing) for s, st in chunk]).astype(np.float32),
                np.stack([s.features[x] for (s, _), x in zip(chunk, sl)]).astype(np.float32),
                np.stack([s.f0_hz[x] for (s, _), x in zip(chunk, sl)]).astype(np.float32),
                np.asarray([s.singer for s, _ in chunk], dtype=np.int64),
                n_singers,
                [s.song_id for s, _ in chunk],
                np.asarray([st for _, st in chunk]),
                np.tile(np.asarray(gains, dtype=np.float64), (len(chunk), 1)),
            )
        )
    return batches
