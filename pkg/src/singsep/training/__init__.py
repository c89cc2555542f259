from .losses import autovc_loss, decoder_loss, encoder_distill_loss, f0_losses
from .stages import DEPENDENCIES, EarlyStopping, StageReport, TrainConfig, run_training_stage

__all__ = [
    "autovc_loss",
    "decoder_loss",
    "encoder_distill_loss",
    "f0_losses",
    "DEPENDENCIES",
    "EarlyStopping",
    "StageReport",
    "TrainConfig",
    "run_training_stage",
]
