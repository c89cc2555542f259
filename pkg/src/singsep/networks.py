"""Teacher autoencoder, student encoder, SDN/SIN decoders and the F0 predictor.

All modules take batch-first tensors ``[B, T, D]``. Vocoder features enter and
leave every module in their raw scale; modules that own a ``FeatureScaler``
standardize internally.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .audio_features.types import F0_BINS, F0_MAX, F0_MIN, N_BINS, N_CEPSTRUM, N_FEATURES
from .exceptions import CheckpointError, DataError, UsageError

CHECKPOINT_VERSION = 1
STAGES = ("teacher", "student_encoder", "sdn", "sin", "f0")


@dataclass
class NetworkConfig:
    code_dim: int = 64
    downsample_factor: int = 16
    encoder_width: int = 512
    encoder_layers: int = 3
    kernel_size: int = 5
    decoder_width: int = 512
    decoder_lstm_width: int = 512
    postnet_width: int = 512
    postnet_layers: int = 5
    mixture_width: int = 256  # SIN projection of the mixture spectrogram
    f0_width: int = 256
    f0_layers: int = 6
    f0_mode: str = "continuous"
    n_bins: int = F0_BINS
    fmin: float = F0_MIN
    fmax: float = F0_MAX

    def __post_init__(self):
        if 128 % self.downsample_factor:
            raise UsageError("128 must be divisible by downsample_factor")
        if self.code_dim % 2:
            raise UsageError("code_dim must be even (half per LSTM direction)")
        if self.f0_mode not in ("continuous", "discrete"):
            raise UsageError(f"unknown f0_mode {self.f0_mode!r}")

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def _conv_stack(in_dim, width, layers, kernel):
    blocks = []
    for i in range(layers):
        blocks += [
            nn.Conv1d(in_dim if i == 0 else width, width, kernel, padding=kernel // 2),
            nn.BatchNorm1d(width),
            nn.ReLU(),
        ]
    return nn.Sequential(*blocks)


def _log_mag(m):
    return torch.log1p(m.clamp_min(0.0))


class FeatureScaler(nn.Module):
    """Centres each feature and scales each group (cepstrum, aperiodicity) by one shared std.

    A shared scale keeps the squared error proportional to the raw cepstral
    distance, so the near-noise high quefrencies are not blown up to unit
    variance.
    """

    def __init__(self, dim=N_FEATURES, groups=((0, N_CEPSTRUM), (N_CEPSTRUM, N_FEATURES))):
        super().__init__()
        self.groups = groups
        self.register_buffer("mean", torch.zeros(dim))
        self.register_buffer("std", torch.ones(dim))

    def fit(self, features):
        x = torch.as_tensor(np.asarray(features).reshape(-1, self.mean.numel()), dtype=torch.float64)
        self.mean.copy_(x.mean(0))
        var = x.var(0)
        std = torch.ones_like(var)
        for lo, hi in self.groups:
            std[lo:hi] = var[lo:hi].mean().sqrt().clamp_min(1e-3)
        self.std.copy_(std)
        return self

    def forward(self, x):
        return (x - self.mean) / self.std

    def inverse(self, z):
        return z * self.std + self.mean


class ContentEncoder(nn.Module):
    """Conv stack + bidirectional LSTM bottleneck, downsampled AutoVC-style.

    Code ``k`` joins the forward state at frame ``k*f + f - 1`` with the
    backward state at frame ``k*f``.
    """

    def __init__(self, in_dim, cfg: NetworkConfig):
        super().__init__()
        self.freq = cfg.downsample_factor
        self.half = cfg.code_dim // 2
        self.convs = _conv_stack(in_dim, cfg.encoder_width, cfg.encoder_layers, cfg.kernel_size)
        self.lstm = nn.LSTM(cfg.encoder_width, self.half, 2, batch_first=True, bidirectional=True)

    def forward(self, x):
        if x.shape[1] % self.freq:
            raise DataError(f"{x.shape[1]} frames is not a multiple of {self.freq}")
        h = self.convs(x.transpose(1, 2)).transpose(1, 2)
        out, _ = self.lstm(h)
        fwd = out[:, self.freq - 1 :: self.freq, : self.half]
        bwd = out[:, :: self.freq, self.half :]
        return torch.cat([fwd, bwd], dim=-1)


class Decoder(nn.Module):
    """Upsampled codes + per-frame conditioning -> vocoder features (standardized).

    A residual post-stack refines the first estimate; both are returned.
    """

    def __init__(self, cond_dim, cfg: NetworkConfig, out_dim=N_FEATURES):
        super().__init__()
        self.freq = cfg.downsample_factor
        self.convs = _conv_stack(cfg.code_dim + cond_dim, cfg.decoder_width, 3, cfg.kernel_size)
        self.lstm = nn.LSTM(cfg.decoder_width, cfg.decoder_lstm_width, 2, batch_first=True)
        self.proj = nn.Linear(cfg.decoder_lstm_width, out_dim)
        post = []
        for i in range(cfg.postnet_layers):
            last = i == cfg.postnet_layers - 1
            post += [
                nn.Conv1d(out_dim if i == 0 else cfg.postnet_width,
                          out_dim if last else cfg.postnet_width,
                          cfg.kernel_size, padding=cfg.kernel_size // 2),
                nn.BatchNorm1d(out_dim if last else cfg.postnet_width),
            ]
            if not last:
                post.append(nn.Tanh())
        self.postnet = nn.Sequential(*post)

    def forward(self, codes, cond):
        up = codes.repeat_interleave(self.freq, dim=1)
        if cond.shape[1] != up.shape[1]:
            raise DataError(f"conditioning has {cond.shape[1]} frames, codes expand to {up.shape[1]}")
        h = self.convs(torch.cat([up, cond], dim=-1).transpose(1, 2)).transpose(1, 2)
        h, _ = self.lstm(h)
        first = self.proj(h)
        refined = first + self.postnet(first.transpose(1, 2)).transpose(1, 2)
        return refined, first


def _broadcast(onehot, frames):
    return onehot[:, None, :].expand(-1, frames, -1)


def _as_onehot(singers, n_singers, batch):
    s = torch.as_tensor(singers)
    if s.dim() == 0:
        s = s.expand(batch)
    if s.dim() == 1 and s.dtype in (torch.int64, torch.int32):
        if (s < 0).any() or (s >= n_singers).any():
            raise UsageError(f"singer index out of range for {n_singers} singers: {s.tolist()}")
        return F.one_hot(s.long(), n_singers).float()
    s = s.float()
    if s.dim() == 1:
        s = s[None].expand(batch, -1)
    if s.shape[-1] != n_singers or not torch.all(s.sum(-1) == 1):
        raise UsageError(f"expected one-hot singer vectors of length {n_singers}")
    return s


class TeacherAutoencoder(nn.Module):
    """E_avc and D_avc: singer-conditioned bottleneck autoencoder on vocoder features."""

    def __init__(self, n_singers, cfg: NetworkConfig):
        super().__init__()
        self.n_singers = n_singers
        self.scaler = FeatureScaler()
        self.encoder = ContentEncoder(N_FEATURES + n_singers, cfg)
        self.decoder = Decoder(n_singers, cfg)

    def encode(self, x, singers):
        s = _as_onehot(singers, self.n_singers, x.shape[0]).to(x.device)
        return self.encoder(torch.cat([self.scaler(x), _broadcast(s, x.shape[1])], dim=-1))

    def decode(self, codes, singers, frames=None):
        frames = frames or codes.shape[1] * self.decoder.freq
        s = _as_onehot(singers, self.n_singers, codes.shape[0]).to(codes.device)
        z, z0 = self.decoder(codes, _broadcast(s, frames))
        return self.scaler.inverse(z), self.scaler.inverse(z0)

    def forward(self, x, singers):
        codes = self.encode(x, singers)
        x_hat, _ = self.decode(codes, singers, x.shape[1])
        return codes, x_hat


class StudentEncoder(nn.Module):
    """E_spec: mixture magnitude spectrogram -> content codes. Takes no singer input."""

    def __init__(self, cfg: NetworkConfig):
        super().__init__()
        self.encoder = ContentEncoder(N_BINS, cfg)

    def forward(self, mag):
        if mag.shape[-1] != N_BINS:
            raise DataError(f"expected {N_BINS} frequency bins, got {mag.shape[-1]}")
        return self.encoder(_log_mag(mag))


class SDNDecoder(nn.Module):
    """D_sdn: same decoder architecture as the teacher's, conditioned on the singer."""

    def __init__(self, n_singers, cfg: NetworkConfig):
        super().__init__()
        self.n_singers = n_singers
        self.scaler = FeatureScaler()
        self.decoder = Decoder(n_singers, cfg)

    def forward(self, codes, singers, return_first=False):
        frames = codes.shape[1] * self.decoder.freq
        s = _as_onehot(singers, self.n_singers, codes.shape[0]).to(codes.device)
        z, z0 = self.decoder(codes, _broadcast(s, frames))
        if return_first:
            return self.scaler.inverse(z), self.scaler.inverse(z0)
        return self.scaler.inverse(z)


class SINDecoder(nn.Module):
    """D_sin: decoder conditioned on the mixture spectrogram instead of the singer."""

    def __init__(self, cfg: NetworkConfig):
        super().__init__()
        self.scaler = FeatureScaler()
        self.mixture = nn.Sequential(
            nn.Conv1d(N_BINS, cfg.mixture_width, 1), nn.BatchNorm1d(cfg.mixture_width), nn.ReLU()
        )
        self.decoder = Decoder(cfg.mixture_width, cfg)

    def forward(self, codes, mag, return_first=False):
        if mag.shape[-1] != N_BINS:
            raise DataError(f"expected {N_BINS} frequency bins, got {mag.shape[-1]}")
        cond = self.mixture(_log_mag(mag).transpose(1, 2)).transpose(1, 2)
        z, z0 = self.decoder(codes, cond)
        if return_first:
            return self.scaler.inverse(z), self.scaler.inverse(z0)
        return self.scaler.inverse(z)


class F0Predictor(nn.Module):
    """Temporal conv stack on the mixture with continuous and discrete heads.

    ``forward`` returns ``(value, voicing_logit, class_logits)``; ``value`` is
    the sigmoid-bounded normalized log-F0. The input is log magnitude with a
    small floor, standardized per bin, so weak upper harmonics still count.
    """

    def __init__(self, cfg: NetworkConfig):
        super().__init__()
        self.input_norm = nn.BatchNorm1d(N_BINS, affine=False)
        self.convs = _conv_stack(N_BINS, cfg.f0_width, cfg.f0_layers, cfg.kernel_size)
        self.continuous = nn.Linear(cfg.f0_width, 2)
        self.discrete = nn.Linear(cfg.f0_width, cfg.n_bins + 1)

    def forward(self, mag):
        if mag.shape[-1] != N_BINS:
            raise DataError(f"expected {N_BINS} frequency bins, got {mag.shape[-1]}")
        x = torch.log(mag.clamp_min(0.0) + 1e-3).transpose(1, 2)
        h = self.convs(self.input_norm(x)).transpose(1, 2)
        c = self.continuous(h)
        return torch.sigmoid(c[..., 0]), c[..., 1], self.discrete(h)


def build_network(stage, cfg: NetworkConfig, n_singers: int):
    if stage == "teacher":
        return TeacherAutoencoder(n_singers, cfg)
    if stage == "student_encoder":
        return StudentEncoder(cfg)
    if stage == "sdn":
        return SDNDecoder(n_singers, cfg)
    if stage == "sin":
        return SINDecoder(cfg)
    if stage == "f0":
        return F0Predictor(cfg)
    raise UsageError(f"unknown stage {stage!r}; expected one of {STAGES}")


# checkpoints ---------------------------------------------------------------


@dataclass
class ModelCheckpoint:
    stage: str
    config: NetworkConfig
    n_singers: int
    weights: dict  # network name -> state dict
    format_version: int = CHECKPOINT_VERSION
    extra: dict = None

    def build(self, name=None):
        """Instantiate the stored network with its weights, in eval mode."""
        name = name or self.stage
        net = build_network(name, self.config, self.n_singers)
        net.load_state_dict(self.weights[name])
        return net.eval()


def save_checkpoint(ckpt: ModelCheckpoint, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": ckpt.format_version,
        "stage": ckpt.stage,
        "config": asdict(ckpt.config),
        "n_singers": ckpt.n_singers,
        "weights": {k: {n: t.detach().cpu().clone() for n, t in sd.items()} for k, sd in ckpt.weights.items()},
        "extra": ckpt.extra or {},
    }
    tmp = path.with_name(path.name + ".tmp")
    torch.save(payload, tmp)
    os.replace(tmp, path)


def load_checkpoint(path, expect_stage=None, expect_config: NetworkConfig | None = None) -> ModelCheckpoint:
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: checkpoint format {payload.get('format_version')}, expected {CHECKPOINT_VERSION}"
        )
    if payload["stage"] not in STAGES:
        raise CheckpointError(f"{path}: unknown stage tag {payload['stage']!r}")
    if expect_stage is not None and payload["stage"] != expect_stage:
        raise CheckpointError(f"{path}: holds stage {payload['stage']!r}, expected {expect_stage!r}")
    config = NetworkConfig.from_dict(payload["config"])
    if expect_config is not None and asdict(expect_config) != asdict(config):
        raise CheckpointError(f"{path}: network config differs from the requested one")
    return ModelCheckpoint(
        payload["stage"], config, payload["n_singers"], payload["weights"],
        payload["format_version"], payload.get("extra") or {},
    )


# forward contracts on domain types -----------------------------------------


@dataclass
class ContentEmbedding:
    values: np.ndarray  # [n_codes, code_dim]
    downsample_factor: int = 16

    @property
    def n_codes(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.n_codes * self.downsample_factor


def _batch(values):
    t = torch.as_tensor(np.asarray(values), dtype=torch.float32)
    return t[None] if t.dim() == 2 else t


def _singer_arg(singer):
    if isinstance(singer, (int, np.integer)):
        return torch.tensor([int(singer)])
    arr = np.asarray(singer)
    if arr.ndim == 0:
        return torch.tensor([int(arr)])
    return torch.as_tensor(arr[None] if arr.ndim == 1 and arr.dtype.kind == "f" else arr)


@torch.no_grad()
def teacher_forward(model: TeacherAutoencoder, features, singer):
    """Return ``(C_avc, X_hat)`` for one feature sequence."""
    from .audio_features.types import VocoderFeatures

    model.eval()
    x = _batch(features.values if isinstance(features, VocoderFeatures) else features)
    codes, x_hat = model(x, _singer_arg(singer))
    return (
        ContentEmbedding(codes[0].numpy(), model.decoder.freq),
        VocoderFeatures(x_hat[0].numpy().astype(np.float64)),
    )


@torch.no_grad()
def student_encode(model: StudentEncoder, mag) -> ContentEmbedding:
    from .audio_features.types import MagSpectrogram

    model.eval()
    m = _batch(mag.values if isinstance(mag, MagSpectrogram) else mag)
    return ContentEmbedding(model(m)[0].numpy(), model.encoder.freq)


@torch.no_grad()
def sdn_decode(model: SDNDecoder, codes: ContentEmbedding, singer):
    from .audio_features.types import VocoderFeatures

    model.eval()
    out = model(_batch(codes.values), _singer_arg(singer))
    return VocoderFeatures(out[0].numpy().astype(np.float64))


@torch.no_grad()
def sin_decode(model: SINDecoder, codes: ContentEmbedding, mag):
    from .audio_features.types import MagSpectrogram, VocoderFeatures

    model.eval()
    m = _batch(mag.values if isinstance(mag, MagSpectrogram) else mag)
    if codes.n_frames != m.shape[1]:
        raise DataError(f"{codes.n_codes} codes expand to {codes.n_frames} frames, mixture has {m.shape[1]}")
    out = model(_batch(codes.values), m)
    return VocoderFeatures(out[0].numpy().astype(np.float64))


@torch.no_grad()
def f0_predict(model: F0Predictor, mag, mode: str = "continuous", cfg: NetworkConfig | None = None):
    """Pitch contour from a mixture spectrogram.

    Continuous mode thresholds the voicing head at 0.5; discrete mode decodes
    the argmax class and keeps the per-frame class distribution in
    ``probabilities``.
    """
    from .audio_features.types import F0Contour, MagSpectrogram

    cfg = cfg or NetworkConfig()
    model.eval()
    m = _batch(mag.values if isinstance(mag, MagSpectrogram) else mag)
    value, voicing, logits = model(m)
    if mode == "continuous":
        voiced = (torch.sigmoid(voicing[0]) > 0.5).numpy()
        values = np.where(voiced, value[0].double().numpy(), 0.0)
        return F0Contour(values, voiced, "continuous", cfg.fmin, cfg.fmax, cfg.n_bins)
    if mode == "discrete":
        probs = torch.softmax(logits[0].double(), dim=-1).numpy()
        classes = probs.argmax(-1)
        return F0Contour(classes, classes > 0, "discrete", cfg.fmin, cfg.fmax, cfg.n_bins, probabilities=probs)
    raise UsageError(f"unknown f0 mode {mode!r}")
