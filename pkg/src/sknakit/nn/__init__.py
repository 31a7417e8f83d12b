from .adam import AdamState, adam_step, init_adam
from .arch import ArchSpec
from .checkpoint import load_checkpoint, save_checkpoint
from .loss import weighted_cross_entropy
from .model import ModelParams, backward, forward, init_model, predict, softmax

__all__ = [
    "AdamState",
    "ArchSpec",
    "ModelParams",
    "adam_step",
    "backward",
    "forward",
    "init_adam",
    "init_model",
    "load_checkpoint",
    "predict",
    "save_checkpoint",
    "softmax",
    "weighted_cross_entropy",
]
