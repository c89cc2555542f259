"""Staged training: teacher -> student encoder -> SDN / SIN decoders, plus F0."""

from __future__ import annotations

import json
import math
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from ..dataset import DEFAULT_GAIN_RANGE, EXCERPT_FRAMES, fixed_batches, load_corpus, sample_training_batch
from ..dataset.manifest import DatasetManifest
from ..exceptions import DataError, DependencyError, UsageError
from ..networks import STAGES, ModelCheckpoint, NetworkConfig, build_network
from .losses import autovc_loss, decoder_loss, encoder_distill_loss, f0_losses

logger = logging.getLogger(__name__)

DEPENDENCIES = {
    "teacher": (),
    "student_encoder": ("teacher",),
    "sdn": ("student_encoder",),
    "sin": ("student_encoder",),
    "f0": (),
}


@dataclass
class TrainConfig:
    lambda_content: float = 1.0
    learning_rate: float = 1e-4
    batch_size: int = 30
    excerpt_frames: int = EXCERPT_FRAMES
    max_steps: int = 100_000
    val_every: int = 500
    patience: int = 10
    seed: int = 0
    gain_range: tuple = DEFAULT_GAIN_RANGE
    mixing: str = "magnitude"
    grad_clip: float = 0.0  # 0 disables clipping

    def __post_init__(self):
        if self.lambda_content < 0:
            raise UsageError("lambda_content must be >= 0")
        if self.batch_size < 1 or self.patience < 1 or self.val_every < 1:
            raise UsageError("batch_size, patience and val_every must be >= 1")
        self.gain_range = tuple(self.gain_range)

    @classmethod
    def from_dict(cls, d):
        names = cls.__dataclass_fields__
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass
class StageReport:
    stage: str
    train_losses: list = field(default_factory=list)  # (step, loss)
    val_checks: list = field(default_factory=list)  # (step, loss)
    best_step: int = 0
    best_val: float = float("inf")
    stop_reason: str = ""
    seconds: float = 0.0

    @property
    def initial_val(self) -> float:
        return self.val_checks[0][1]

    @property
    def final_val(self) -> float:
        return self.best_val

    def to_jsonl(self) -> str:
        lines = [json.dumps({"kind": "train", "stage": self.stage, "step": s, "loss": v})
                 for s, v in self.train_losses]
        lines += [json.dumps({"kind": "val", "stage": self.stage, "step": s, "loss": v})
                  for s, v in self.val_checks]
        lines.append(json.dumps({"kind": "summary", "stage": self.stage, "best_step": self.best_step,
                                 "best_val": self.best_val, "stop_reason": self.stop_reason,
                                 "seconds": self.seconds}))
        return "\n".join(lines) + "\n"


class EarlyStopping:
    """Stop once ``patience`` consecutive checks fail to beat the best value."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = float("inf")
        self.bad_checks = 0

    def update(self, value: float) -> bool:
        if value < self.best:
            self.best = value
            self.bad_checks = 0
            return True
        self.bad_checks += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.bad_checks >= self.patience


def _tensors(batch):
    return (
        torch.from_numpy(batch.mixture_mag),
        torch.from_numpy(batch.vocal_features),
        torch.from_numpy(batch.singers),
    )


def _freeze(net):
    net.eval()
    for p in net.parameters():
        p.requires_grad_(False)
    return net


def _stage_loss(stage, net, deps, batch, tcfg, ncfg):
    mix, feats, singers = _tensors(batch)
    if stage == "teacher":
        codes = net.encode(feats, singers)
        x_hat, _ = net.decode(codes, singers, feats.shape[1])
        c_hat = net.encode(x_hat, singers)
        return autovc_loss(net.scaler(feats), net.scaler(x_hat), codes, c_hat, tcfg.lambda_content)
    if stage == "student_encoder":
        with torch.no_grad():
            target = deps["teacher"].encode(feats, singers)
        return encoder_distill_loss(net(mix), target)
    if stage in ("sdn", "sin"):
        with torch.no_grad():
            codes = deps["student_encoder"](mix)
        x_hat = net(codes, singers if stage == "sdn" else mix)
        return decoder_loss(net.scaler(x_hat), net.scaler(feats))
    if stage == "f0":
        value, voicing, logits = net(mix)
        target, voiced = batch.f0_continuous(ncfg.fmin, ncfg.fmax)
        classes = batch.f0_classes(ncfg.n_bins, ncfg.fmin, ncfg.fmax)
        cont, disc = f0_losses(value, voicing, logits, torch.from_numpy(target).float(),
                               torch.from_numpy(voiced), torch.from_numpy(classes),
                               value_scale=12.0 * math.log2(ncfg.fmax / ncfg.fmin))
        return cont + disc
    raise UsageError(f"unknown stage {stage!r}")


def _snapshot(net):
    return {k: v.detach().clone() for k, v in net.state_dict().items()}


def run_training_stage(stage: str, data, net_config: NetworkConfig | None = None,
                       train_config: TrainConfig | None = None, checkpoints: dict | None = None,
                       n_singers: int | None = None):
    """Train one stage and return ``(best-validation ModelCheckpoint, StageReport)``.

    ``data`` is a ``DatasetManifest`` or an already loaded ``{split: [SongData]}``
    mapping. ``checkpoints`` maps stage names to the ``ModelCheckpoint`` of
    each dependency; those networks stay frozen.
    """
    if stage not in STAGES:
        raise UsageError(f"unknown stage {stage!r}; expected one of {STAGES}")
    ncfg = net_config or NetworkConfig()
    tcfg = train_config or TrainConfig()
    checkpoints = checkpoints or {}
    for need in DEPENDENCIES[stage]:
        if need not in checkpoints:
            raise DependencyError(f"stage {stage!r} requires a trained {need!r} checkpoint")

    if isinstance(data, DatasetManifest):
        n_singers = n_singers or data.n_singers
        data = load_corpus(data, ("train", "val"))
    train, val = data.get("train", []), data.get("val", [])
    if not train:
        raise DataError("no training songs")
    if not val:
        raise DataError("early stopping needs a validation split")
    n_singers = n_singers or (max(s.singer for s in train + val) + 1)

    deps = {}
    for need in DEPENDENCIES[stage]:
        ck = checkpoints[need]
        if ck.n_singers != n_singers:
            raise DependencyError(f"{need} checkpoint was trained for {ck.n_singers} singers, not {n_singers}")
        deps[need] = _freeze(ck.build(need))

    torch.manual_seed(tcfg.seed)
    rng = np.random.default_rng(tcfg.seed)
    net = build_network(stage, ncfg, n_singers)
    if hasattr(net, "scaler"):
        net.scaler.fit(np.concatenate([s.features for s in train]))
    optimizer = torch.optim.Adam([p for p in net.parameters() if p.requires_grad], lr=tcfg.learning_rate)
    val_batches = fixed_batches(val, tcfg.batch_size, n_singers, excerpt_frames=tcfg.excerpt_frames,
                                mixing=tcfg.mixing)

    def validate():
        net.eval()
        with torch.no_grad():
            losses = [float(_stage_loss(stage, net, deps, b, tcfg, ncfg)) for b in val_batches]
            sizes = [len(b) for b in val_batches]
        net.train()
        return float(np.average(losses, weights=sizes))

    report = StageReport(stage)
    stopper = EarlyStopping(tcfg.patience)
    start_time = time.time()
    first = validate()
    report.val_checks.append((0, first))
    stopper.update(first)
    best_state, report.best_step, report.best_val = _snapshot(net), 0, first

    net.train()
    step = 0
    report.stop_reason = "max_steps"
    for step in range(1, tcfg.max_steps + 1):
        batch = sample_training_batch(train, tcfg.batch_size, tcfg.gain_range, rng, n_singers,
                                      tcfg.excerpt_frames, tcfg.mixing)
        loss = _stage_loss(stage, net, deps, batch, tcfg, ncfg)
        optimizer.zero_grad()
        loss.backward()
        if tcfg.grad_clip > 0:
            torch.nn.utils.clip_grad_norm_(net.parameters(), tcfg.grad_clip)
        optimizer.step()
        report.train_losses.append((step, loss.item()))

        if step % tcfg.val_every == 0 or step == tcfg.max_steps:
            v = validate()
            report.val_checks.append((step, v))
            logger.info("%s step %d train %.4f val %.4f", stage, step, loss.item(), v)
            if stopper.update(v):
                best_state, report.best_step, report.best_val = _snapshot(net), step, v
            elif stopper.should_stop:
                report.stop_reason = "early"
                break

    net.load_state_dict(best_state)
    net.eval()
    report.seconds = time.time() - start_time
    ckpt = ModelCheckpoint(
        stage, ncfg, n_singers, {stage: _snapshot(net)},
        extra={"train_config": asdict(tcfg), "best_step": report.best_step, "best_val": report.best_val},
    )
    return ckpt, report
