"""Inference (separation) and MCD evaluation on top of trained checkpoints."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .audio_features import (
    AudioClip,
    F0Contour,
    MagSpectrogram,
    VocoderFeatures,
    load_wav,
    mcd,
    stft_magnitude,
    vocoder_analyze,
    vocoder_synthesize,
)
from .audio_features.vocoder import PulseNoiseVocoder
from .dataset.manifest import DatasetManifest
from .exceptions import DataError, DependencyError, UsageError
from .networks import STAGES, ModelCheckpoint, f0_predict, load_checkpoint

logger = logging.getLogger(__name__)

WINDOW_FRAMES = 128
MODES = ("sin", "sdn")
BASELINE_TAGS = ("mean", "oracle")


class CheckpointSet:
    """Trained stages keyed by stage name; networks are built once and reused."""

    def __init__(self, checkpoints: dict | None = None):
        self.checkpoints = dict(checkpoints or {})
        self._nets = {}
        for name, ck in self.checkpoints.items():
            if ck.stage != name:
                raise UsageError(f"checkpoint under key {name!r} holds stage {ck.stage!r}")

    @classmethod
    def from_dir(cls, directory, stages=STAGES):
        """Load every ``<stage>.pt`` present in ``directory``."""
        directory = Path(directory)
        found = {}
        for stage in stages:
            path = directory / f"{stage}.pt"
            if path.exists():
                found[stage] = load_checkpoint(path, expect_stage=stage)
        return cls(found)

    def require(self, *stages):
        missing = [s for s in stages if s not in self.checkpoints]
        if missing:
            raise DependencyError(f"missing trained checkpoint(s): {', '.join(missing)}")

    def net(self, stage):
        self.require(stage)
        if stage not in self._nets:
            self._nets[stage] = self.checkpoints[stage].build(stage)
        return self._nets[stage]

    def __contains__(self, stage):
        return stage in self.checkpoints

    @property
    def n_singers(self):
        return next((ck.n_singers for ck in self.checkpoints.values()), None)


def _as_set(checkpoints):
    return checkpoints if isinstance(checkpoints, CheckpointSet) else CheckpointSet(checkpoints)


@dataclass
class SeparationResult:
    vocal_clip: AudioClip
    predicted_features: VocoderFeatures
    predicted_f0: F0Contour
    mode: str
    singer_id: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise UsageError(f"unknown mode {self.mode!r}")
        if self.mode == "sdn" and self.singer_id is None:
            raise UsageError("sdn results must carry the singer id")
        if len(self.vocal_clip) != self.predicted_features.n_frames * 160:
            raise DataError("vocal clip length does not match the feature frame grid")


def _crossfade_weights(n_codes):
    # triangle peaking at the window centre, strictly positive at the edges
    k = np.arange(n_codes) + 0.5
    return 1.0 - np.abs(k - n_codes / 2) / (n_codes / 2) + 1e-3


def encode_windows(student, mag: np.ndarray, window: int = WINDOW_FRAMES):
    """Content codes for a whole spectrogram.

    The spectrogram is zero-padded, encoded in ``window``-frame windows with
    50 % overlap, and overlapping codes are cross-faded with triangular
    weights. Returns ``(codes [n_codes, code_dim], padded_frames)``.
    """
    freq = student.encoder.freq
    hop = window // 2
    if hop % freq:
        raise UsageError(f"half window {hop} is not a multiple of the downsample factor {freq}")
    n = len(mag)
    total = max(window, int(np.ceil(n / hop)) * hop)
    padded = np.zeros((total, mag.shape[1]), dtype=np.float32)
    padded[:n] = mag
    starts = list(range(0, total - window + 1, hop))
    x = torch.from_numpy(np.stack([padded[s : s + window] for s in starts]))
    with torch.no_grad():
        codes = student(x).double().numpy()  # [n_windows, window/freq, code_dim]
    per = window // freq
    w = _crossfade_weights(per)
    acc = np.zeros((total // freq, codes.shape[-1]))
    norm = np.zeros(total // freq)
    for i, s in enumerate(starts):
        acc[s // freq : s // freq + per] += w[:, None] * codes[i]
        norm[s // freq : s // freq + per] += w
    return (acc / norm[:, None]).astype(np.float32), padded


def predict_features(mag, mode: str, checkpoints, singer_id=None) -> VocoderFeatures:
    """Decoder output for a mixture magnitude spectrogram, before synthesis."""
    if mode not in MODES:
        raise UsageError(f"unknown mode {mode!r}; expected one of {MODES}")
    if mode == "sdn" and singer_id is None:
        raise UsageError("sdn mode needs a singer id")
    cks = _as_set(checkpoints)
    cks.require("student_encoder", mode)
    m = mag.values if isinstance(mag, MagSpectrogram) else np.asarray(mag, dtype=np.float32)
    n = len(m)
    codes, padded = encode_windows(cks.net("student_encoder"), m)
    c = torch.from_numpy(codes)[None]
    decoder = cks.net(mode)
    with torch.no_grad():
        if mode == "sdn":
            if not 0 <= int(singer_id) < decoder.n_singers:
                raise UsageError(f"singer id {singer_id} out of range for {decoder.n_singers} singers")
            out = decoder(c, torch.tensor([int(singer_id)]))
        else:
            out = decoder(c, torch.from_numpy(padded)[None])
    return VocoderFeatures(out[0, :n].double().numpy())


def separate(mixture: AudioClip, mode: str, singer_id=None, checkpoints=None, f0_mode: str | None = None,
             seed: int = 0) -> SeparationResult:
    """Mixture audio -> resynthesized clean vocal.

    Needs the student encoder, the chosen decoder and the F0 predictor. Only
    the mixture is read.
    """
    if mode not in MODES:
        raise UsageError(f"unknown mode {mode!r}; expected one of {MODES}")
    if mode == "sdn" and singer_id is None:
        raise UsageError("sdn mode needs a singer id")
    cks = _as_set(checkpoints)
    cks.require("student_encoder", mode, "f0")
    if mode == "sdn" and not 0 <= int(singer_id) < cks.checkpoints["sdn"].n_singers:
        raise UsageError(f"singer id {singer_id} out of range for {cks.checkpoints['sdn'].n_singers} singers")

    mag = stft_magnitude(mixture, dtype=np.float32)
    feats = predict_features(mag, mode, cks, singer_id)
    f0_cfg = cks.checkpoints["f0"].config
    f0 = f0_predict(cks.net("f0"), mag, f0_mode or f0_cfg.f0_mode, f0_cfg)
    clip = vocoder_synthesize(feats, f0, backend=PulseNoiseVocoder(seed=seed))
    return SeparationResult(clip, feats, f0, mode, None if singer_id is None else int(singer_id))


# evaluation ----------------------------------------------------------------


@dataclass
class TrackScore:
    track_id: str
    model_tag: str
    mcd_mean_db: float
    mcd_std_db: float
    n_frames: int


@dataclass
class EvalReport:
    tracks: list = field(default_factory=list)  # TrackScore
    skipped: list = field(default_factory=list)  # (track_id, reason)

    @property
    def models(self):
        return list(dict.fromkeys(t.model_tag for t in self.tracks))

    def aggregate(self, model_tag):
        """Mean and std over the per-track means, tracks weighted equally."""
        means = np.array([t.mcd_mean_db for t in self.tracks if t.model_tag == model_tag])
        if not len(means):
            raise DataError(f"no scored tracks for model {model_tag!r}")
        return float(means.mean()), float(means.std())

    def to_tsv(self) -> str:
        rows = ["model\tmcd_mean_db\tmcd_std_db\tn_tracks"]
        for tag in self.models:
            m, s = self.aggregate(tag)
            n = sum(t.model_tag == tag for t in self.tracks)
            rows.append(f"{tag}\t{m:.4f}\t{s:.4f}\t{n}")
        return "\n".join(rows) + "\n"

    def to_jsonl(self) -> str:
        lines = [json.dumps({"kind": "track", **t.__dict__}) for t in self.tracks]
        for tag in self.models:
            m, s = self.aggregate(tag)
            lines.append(json.dumps({"kind": "aggregate", "model_tag": tag, "mcd_mean_db": m, "mcd_std_db": s}))
        lines += [json.dumps({"kind": "skipped", "track_id": t, "reason": r}) for t, r in self.skipped]
        return "\n".join(lines) + "\n"


def evaluate_mcd(manifest: DatasetManifest, checkpoints, modes=MODES, baselines=BASELINE_TAGS,
                 split: str = "test") -> EvalReport:
    """Score decoder outputs against features of the clean test vocals.

    ``baselines`` may include ``"mean"`` (the training-target mean repeated
    on every frame) and ``"oracle"`` (the reference itself).
    """
    for m in modes:
        if m not in MODES:
            raise UsageError(f"unknown mode {m!r}; expected one of {MODES}")
    for b in baselines:
        if b not in BASELINE_TAGS:
            raise UsageError(f"unknown baseline {b!r}; expected one of {BASELINE_TAGS}")
    cks = _as_set(checkpoints)
    for m in modes:
        cks.require("student_encoder", m)
    mean_feature = None
    if "mean" in baselines:
        holder = next((s for s in ("sin", "sdn", "teacher") if s in cks), None)
        if holder is None:
            raise DependencyError("the mean baseline needs a trained decoder (its scaler holds the training mean)")
        mean_feature = cks.net(holder).scaler.mean.double().numpy()

    entries = manifest.split(split)
    if not entries:
        raise DataError(f"manifest has no {split!r} entries")
    report = EvalReport()
    for entry in entries:
        try:
            vocal = load_wav(entry.vocal_path)
        except (OSError, DataError) as exc:
            logger.warning("skipping %s: %s", entry.song_id, exc)
            report.skipped.append((entry.song_id, f"reference unavailable: {exc}"))
            continue
        backing = load_wav(entry.backing_path).samples if entry.backing_path else np.zeros(len(vocal))
        n = min(len(vocal), len(backing))
        ref, _ = vocoder_analyze(AudioClip(vocal.samples[:n]))
        mag = stft_magnitude(AudioClip(vocal.samples[:n] + backing[:n]), dtype=np.float32)

        def score(tag, est):
            mu, sd = mcd(ref, est)
            report.tracks.append(TrackScore(entry.song_id, tag, mu, sd, ref.n_frames))

        for m in modes:
            singer = manifest.singer_of(entry) if m == "sdn" else None
            score(m, predict_features(mag, m, cks, singer))
        if mean_feature is not None:
            score("mean", VocoderFeatures(np.tile(mean_feature, (ref.n_frames, 1))))
        if "oracle" in baselines:
            score("oracle", ref)
    return report
