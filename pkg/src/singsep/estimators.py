"""scikit-learn style wrappers around the feature extractors and the full pipeline."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .audio_features import stft_magnitude, vocoder_analyze
from .audio_features.vocoder import PulseNoiseVocoder
from .dataset import DatasetManifest, load_corpus
from .networks import NetworkConfig, save_checkpoint
from .pipeline import CheckpointSet, evaluate_mcd, predict_features, separate
from .training import DEPENDENCIES, TrainConfig, run_training_stage
from .validation import check_choice, check_clip, check_singer


class StftMagnitude(TransformerMixin, BaseEstimator):
    """Audio clip -> ``[frames, 513]`` magnitude spectrogram. Stateless."""

    def fit(self, X=None, y=None):
        self.n_bins_ = 513
        return self

    def transform(self, X):
        return stft_magnitude(check_clip(X), dtype=np.float32).values


class VocoderAnalyzer(TransformerMixin, BaseEstimator):
    """Clean vocal clip -> ``[frames, 64]`` vocoder features. Stateless."""

    def __init__(self, seed=0):
        self.seed = seed

    def fit(self, X=None, y=None):
        self.backend_ = PulseNoiseVocoder(seed=self.seed)
        return self

    def transform(self, X):
        backend = getattr(self, "backend_", None) or PulseNoiseVocoder(seed=self.seed)
        feats, _ = vocoder_analyze(check_clip(X), backend)
        return feats.values


class SingingVoiceSeparator(BaseEstimator):
    """Trains every stage on a manifest, then separates mixtures.

    ``fit`` takes a ``DatasetManifest``; ``predict`` maps mixture audio to
    vocal samples; ``transform`` stops at the decoder features; ``score``
    returns the negative aggregate test MCD so that higher is better.
    """

    def __init__(self, mode="sin", singer_id=None, network=None, train=None, stage_overrides=None,
                 checkpoint_dir=None, cache_dir=None, seed=0):
        self.mode = mode
        self.singer_id = singer_id
        self.network = network
        self.train = train
        self.stage_overrides = stage_overrides
        self.checkpoint_dir = checkpoint_dir
        self.cache_dir = cache_dir
        self.seed = seed

    def _stages(self):
        return ("teacher", "student_encoder", self.mode, "f0")

    def fit(self, X, y=None):
        check_choice("mode", self.mode, ("sin", "sdn"))
        manifest = X if isinstance(X, DatasetManifest) else DatasetManifest.load(X)
        ncfg = NetworkConfig.from_dict(self.network or {})
        data = load_corpus(manifest, ("train", "val"), cache_dir=self.cache_dir)
        done, self.reports_ = {}, {}
        for stage in self._stages():
            cfg = dict(self.train or {})
            cfg.update((self.stage_overrides or {}).get(stage, {}))
            cfg["seed"] = self.seed
            deps = {k: done[k] for k in DEPENDENCIES[stage]}
            done[stage], self.reports_[stage] = run_training_stage(
                stage, data, ncfg, TrainConfig.from_dict(cfg), deps, manifest.n_singers)
            if self.checkpoint_dir:
                save_checkpoint(done[stage], Path(self.checkpoint_dir) / f"{stage}.pt")
        self.checkpoints_ = CheckpointSet(done)
        self.n_singers_ = manifest.n_singers
        return self

    def _singer(self):
        return check_singer(self.singer_id, self.n_singers_)

    def transform(self, X):
        check_is_fitted(self, "checkpoints_")
        mag = stft_magnitude(check_clip(X), dtype=np.float32)
        return predict_features(mag, self.mode, self.checkpoints_, self._singer()).values

    def predict(self, X):
        check_is_fitted(self, "checkpoints_")
        return separate(check_clip(X), self.mode, self._singer(), self.checkpoints_, seed=self.seed).vocal_clip.samples

    def score(self, X, y=None):
        check_is_fitted(self, "checkpoints_")
        manifest = X if isinstance(X, DatasetManifest) else DatasetManifest.load(X)
        report = evaluate_mcd(manifest, self.checkpoints_, modes=(self.mode,), baselines=())
        return -report.aggregate(self.mode)[0]
