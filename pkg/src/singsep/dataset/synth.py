"""Synthetic singing corpus: formant-filtered additive voices over chord/drum backing.

Voices are rendered harmonic by harmonic, so the per-frame F0 is known
exactly and the generator does not share code with the vocoder it is
used to test.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..audio_features.io import save_wav
from ..audio_features.types import HOP_SIZE, SAMPLE_RATE, AudioClip

# (frequency, bandwidth) pairs in Hz
VOWELS = {
    "a": ((800, 80), (1150, 90), (2900, 120), (3900, 130)),
    "e": ((400, 70), (1700, 80), (2600, 100), (3200, 120)),
    "i": ((270, 60), (2300, 100), (3000, 120), (3700, 150)),
    "o": ((450, 70), (800, 80), (2830, 100), (3500, 130)),
    "u": ((325, 50), (700, 60), (2530, 170), (3500, 180)),
}
VOWEL_NAMES = tuple(VOWELS)


@dataclass(frozen=True)
class SingerProfile:
    name: str
    formant_scale: float = 1.0
    glottal_cutoff: float = 250.0
    ring_gain: float = 1.0  # boost of the 3 kHz singer's formant
    breathiness: float = 0.02
    low_note: float = 110.0
    high_note: float = 440.0


def make_singers(n: int, seed: int = 0) -> list[SingerProfile]:
    rng = np.random.default_rng(seed)
    scales = np.linspace(0.86, 1.16, n) if n > 1 else np.array([1.0])
    singers = []
    for i, scale in enumerate(rng.permutation(scales)):
        low = 110.0 * 2 ** (rng.integers(0, 7) / 12)
        singers.append(
            SingerProfile(
                name=f"singer{i:02d}",
                formant_scale=float(scale),
                glottal_cutoff=float(rng.uniform(150, 400)),
                ring_gain=float(rng.uniform(0.5, 4.0)),
                breathiness=float(rng.uniform(0.005, 0.04)),
                low_note=float(low),
                high_note=float(min(440.0, low * 2 ** (17 / 12))),
            )
        )
    return singers


def envelope_gain(freqs, formants, singer: SingerProfile):
    """Linear amplitude response: parallel formant resonances over a source tilt."""
    freqs = np.asarray(freqs, dtype=np.float64)
    tilt = (1.0 + (freqs / singer.glottal_cutoff) ** 2) ** -0.5
    bumps = np.full_like(freqs, 0.03)
    for weight, (f, b) in zip((1.0, 0.7, 0.35, 0.25), formants):
        f = f * singer.formant_scale
        bumps = bumps + weight / np.sqrt(1.0 + ((freqs - f) / (0.5 * b)) ** 2)
    ring = 3000.0 * singer.formant_scale
    bumps = bumps + 0.1 * singer.ring_gain * np.exp(-0.5 * ((freqs - ring) / 350.0) ** 2)
    return tilt * bumps


@dataclass
class Note:
    start: float  # seconds
    duration: float
    f0: float
    vowel: str
    fricative: float = 0.0  # seconds of unvoiced noise before the note


def _frame_tracks(notes, n_frames, fs, vibrato_rate, vibrato_cents, rng):
    t = (np.arange(n_frames) * HOP_SIZE + HOP_SIZE // 2) / fs
    f0 = np.zeros(n_frames)
    loud = np.zeros(n_frames)
    fric = np.zeros(n_frames)
    formants = np.zeros((n_frames, 4, 2))
    formants[:] = np.asarray(VOWELS["a"], dtype=np.float64)
    for note in notes:
        inside = (t >= note.start) & (t < note.start + note.duration)
        rel = t[inside] - note.start
        phase = rng.uniform(0, 2 * np.pi)
        depth = vibrato_cents * np.clip(rel / 0.15, 0.0, 1.0)
        f0[inside] = note.f0 * 2 ** (depth * np.sin(2 * np.pi * vibrato_rate * rel + phase) / 1200)
        attack = np.clip(rel / 0.03, 0, 1)
        release = np.clip((note.duration - rel) / 0.04, 0, 1)
        loud[inside] = attack * release
        formants[inside] = np.asarray(VOWELS[note.vowel], dtype=np.float64)
        if note.fricative > 0:
            pre = (t >= note.start - note.fricative) & (t < note.start)
            fric[pre] = 1.0
    # glide formants between vowels over ~30 ms
    kernel = np.ones(6) / 6
    for i in range(4):
        for j in range(2):
            formants[:, i, j] = np.convolve(
                np.pad(formants[:, i, j], 3, mode="edge"), kernel, mode="same"
            )[3:-3]
    return t, f0, loud, fric, formants


def render_voice(notes, singer: SingerProfile, duration: float, fs: int = SAMPLE_RATE,
                 vibrato_rate: float = 5.5, vibrato_cents: float = 25.0, seed: int = 0):
    """Render notes as an additive harmonic voice.

    Returns ``(samples, f0_per_frame)`` where ``f0_per_frame`` holds the exact
    F0 at each 5 ms frame center and 0 where the voice is silent or unvoiced.
    """
    rng = np.random.default_rng(seed)
    n_samples = int(round(duration * fs))
    n_frames = n_samples // HOP_SIZE
    t_frames, f0, loud, fric, formants = _frame_tracks(
        notes, n_frames, fs, vibrato_rate, vibrato_cents, rng
    )
    n_samples = n_frames * HOP_SIZE
    ts = np.arange(n_samples)
    sample_t = (ts + 0.5) / fs
    voiced_frames = f0 > 0
    if voiced_frames.any():
        f0_s = np.interp(sample_t, t_frames[voiced_frames], f0[voiced_frames])
    else:
        f0_s = np.full(n_samples, 100.0)
    loud_s = np.interp(sample_t, t_frames, loud)
    phase = 2 * np.pi * np.cumsum(f0_s) / fs

    f0_safe = np.where(voiced_frames, f0, np.maximum(f0_s[::HOP_SIZE][:n_frames], 50.0))
    max_k = int(fs / 2 / max(f0_safe.min(), 50.0))
    k = np.arange(1, max_k + 1)
    amps = np.zeros((n_frames, max_k))
    for i in range(n_frames):
        if loud[i] <= 0:
            continue
        hk = k * f0_safe[i]
        amps[i] = envelope_gain(hk, formants[i], singer) * (hk < fs / 2 - 500)
    voice = np.zeros(n_samples)
    step = 8000
    for lo in range(0, n_samples, step):
        hi = min(lo + step, n_samples)
        a = np.stack([np.interp(sample_t[lo:hi], t_frames, amps[:, j]) for j in range(max_k)])
        voice[lo:hi] = np.sum(a * np.cos(np.outer(k, phase[lo:hi])), axis=0)
    voice *= loud_s

    noise = rng.standard_normal(n_samples)
    spec = np.fft.rfft(noise)
    freqs = np.fft.rfftfreq(n_samples, 1 / fs)
    hiss = np.fft.irfft(spec * ((freqs > 3500) & (freqs < 11000)), n_samples)
    breath = np.fft.irfft(spec * ((freqs > 1000) & (freqs < 6000)), n_samples)
    fric_s = np.interp(sample_t, t_frames, fric)
    ref = np.max(np.abs(voice)) + 1e-9
    voice = voice + ref * (0.35 * fric_s * hiss / (np.std(hiss) + 1e-12)
                           + singer.breathiness * loud_s * breath / (np.std(breath) + 1e-12))
    voice = 0.5 * voice / (np.max(np.abs(voice)) + 1e-9)
    truth = np.where(loud > 0.05, f0, 0.0)
    return voice, truth


def steady_vowel(f0: float, vowel: str = "a", singer: SingerProfile | None = None,
                 duration: float = 0.8, fs: int = SAMPLE_RATE, seed: int = 0):
    singer = singer or SingerProfile("reference", breathiness=0.0)
    notes = [Note(0.05, duration - 0.1, f0, vowel)]
    return render_voice(notes, singer, duration, fs, vibrato_cents=0.0, seed=seed)


def random_melody(singer: SingerProfile, duration: float, rng) -> list[Note]:
    scale = np.array([0, 2, 4, 5, 7, 9, 11])
    notes = []
    t = float(rng.uniform(0.02, 0.1))
    span = 12 * np.log2(singer.high_note / singer.low_note)
    while t < duration - 0.2:
        length = float(rng.uniform(0.18, 0.45))
        octave = int(rng.integers(0, 2))
        semis = scale[rng.integers(0, len(scale))] + 12 * octave
        semis = min(semis, span)
        fric = float(rng.uniform(0.04, 0.08)) if rng.random() < 0.25 else 0.0
        start = t + fric
        length = min(length, duration - 0.05 - start)
        if length < 0.08:
            break
        notes.append(Note(start, length, singer.low_note * 2 ** (semis / 12),
                          VOWEL_NAMES[rng.integers(0, len(VOWEL_NAMES))], fric))
        t = start + length + float(rng.choice([0.0, 0.0, rng.uniform(0.03, 0.12)]))
    return notes


def render_backing(duration: float, fs: int = SAMPLE_RATE, seed: int = 0) -> np.ndarray:
    """Chord pads plus kick/hat percussion."""
    rng = np.random.default_rng(seed)
    n = int(round(duration * fs))
    t = np.arange(n) / fs
    out = np.zeros(n)
    chord_len = float(rng.uniform(0.5, 1.0))
    c = 0.0
    while c < duration:
        root = 65.4 * 2 ** (rng.integers(0, 12) / 12)
        seg = (t >= c) & (t < c + chord_len)
        ts = t[seg] - c
        env = np.minimum(ts / 0.02, 1.0) * np.exp(-ts / 1.5)
        for interval in (0, 4 if rng.random() < 0.5 else 3, 7, 12):
            f = root * 2 ** (interval / 12)
            for h in range(1, 25):
                if h * f > fs / 2 - 1000:
                    break
                out[seg] += env * np.sin(2 * np.pi * h * f * ts) / h**1.3
        c += chord_len
    beat = 60.0 / rng.uniform(100, 140)
    b = 0.0
    i = 0
    while b < duration:
        seg = (t >= b) & (t < b + 0.25)
        ts = t[seg] - b
        if i % 2 == 0:
            out[seg] += 1.5 * np.sin(2 * np.pi * (50 + 100 * np.exp(-ts / 0.03)) * ts) * np.exp(-ts / 0.08)
        hat = rng.standard_normal(seg.sum())
        hat = np.diff(hat, prepend=0.0)
        out[seg] += 0.4 * hat * np.exp(-ts / 0.02)
        b += beat / 2
        i += 1
    return 0.4 * out / (np.max(np.abs(out)) + 1e-9)


def make_synthetic_corpus(root, n_singers: int = 4, clips_per_singer: int = 20,
                          duration: float = 2.5, seed: int = 0, fs: int = SAMPLE_RATE):
    """Write ``<root>/<song>/{vocal,backing}.wav``, ``meta.json`` and ``f0.npy``.

    ``singers.txt`` at the root lists the known singer labels.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    singers = make_singers(n_singers, seed)
    rng = np.random.default_rng(seed + 1)
    (root / "singers.txt").write_text("".join(s.name + "\n" for s in singers))
    songs = []
    for singer in singers:
        for j in range(clips_per_singer):
            song_id = f"{singer.name}_song{j:03d}"
            song_dir = root / song_id
            song_dir.mkdir(exist_ok=True)
            notes = random_melody(singer, duration, rng)
            clip_seed = int(rng.integers(0, 2**31))
            vocal, f0 = render_voice(notes, singer, duration, fs, seed=clip_seed)
            backing = render_backing(len(vocal) / fs, fs, seed=clip_seed + 1)[: len(vocal)]
            save_wav(song_dir / "vocal.wav", AudioClip(vocal, fs))
            save_wav(song_dir / "backing.wav", AudioClip(backing, fs))
            np.save(song_dir / "f0.npy", f0)
            meta = {"singer": singer.name, "profile": asdict(singer),
                    "notes": [asdict(n) for n in notes]}
            (song_dir / "meta.json").write_text(json.dumps(meta, indent=1))
            songs.append(song_id)
    return songs
