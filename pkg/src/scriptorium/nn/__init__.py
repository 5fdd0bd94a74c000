"""Minimal CPU neural engine: enough to build, run, train, and serialize the
line recognizer (and to run the baseline segmentation topology forward)."""

from .ctc import CtcResult, ctc_loss
from .model import (
    ModelSpec,
    Model,
    ShapeError,
    build_fiducial_model,
    build_recognizer,
    build_segmentation_model,
    forward,
    frames_for_width,
)
from .optim import AdamW, PlateauScheduler
from .tensorio import ModelWeights, load_tensors, load_weights, save_tensors, save_weights
from .train import TrainConfig, TrainSample, TrainingDiverged, train

__all__ = [
    "AdamW",
    "CtcResult",
    "Model",
    "ModelSpec",
    "ModelWeights",
    "PlateauScheduler",
    "ShapeError",
    "TrainConfig",
    "TrainSample",
    "TrainingDiverged",
    "build_fiducial_model",
    "build_recognizer",
    "build_segmentation_model",
    "ctc_loss",
    "forward",
    "frames_for_width",
    "load_tensors",
    "load_weights",
    "save_tensors",
    "save_weights",
    "train",
]
