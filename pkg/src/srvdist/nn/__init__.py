"""Siamese convolutional surrogate for shape distances (numpy, float64)."""

from .model import NetworkParams, forward, forward_batch, init_params, make_arch, predict_batch
from .optim import AdamHyper, AdamState, adam_step
from .train import TrainConfig, TrainHistory, evaluate_mse, train

__all__ = [
    "NetworkParams", "forward", "forward_batch", "init_params", "make_arch", "predict_batch",
    "AdamHyper", "AdamState", "adam_step", "TrainConfig", "TrainHistory", "evaluate_mse", "train",
]
