from .batches import (
    DEFAULT_GAIN_RANGE,
    EXCERPT_FRAMES,
    SongData,
    TrainingBatch,
    fixed_batches,
    load_corpus,
    load_song,
    mix_with_gains,
    sample_training_batch,
    singer_vector,
)
from .manifest import DatasetManifest, ManifestEntry, build_manifest
from .synth import make_synthetic_corpus

__all__ = [
    "DatasetManifest",
    "ManifestEntry",
    "SongData",
    "TrainingBatch",
    "build_manifest",
    "fixed_batches",
    "load_corpus",
    "load_song",
    "make_synthetic_corpus",
    "mix_with_gains",
    "sample_training_batch",
    "singer_vector",
    "DEFAULT_GAIN_RANGE",
    "EXCERPT_FRAMES",
]
