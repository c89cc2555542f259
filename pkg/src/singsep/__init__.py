"""Singing-voice separation by distilling a vocoder-feature autoencoder into a spectrogram encoder."""

from .exceptions import (
    CheckpointError,
    DataError,
    DependencyError,
    ManifestError,
    SingsepError,
    UsageError,
)

__version__ = "0.1.0"

__all__ = [
    "CheckpointError",
    "DataError",
    "DependencyError",
    "ManifestError",
    "SingsepError",
    "UsageError",
    "__version__",
]
