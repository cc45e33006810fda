"""Reverse-mode autodiff core: graphs, activations, losses, optimizers."""

from .checkpoint import load_checkpoint, save_checkpoint
from .functional import (apply_activation, as_one_hot, cross_entropy, loss,
                         mse, relu, sigmoid, soft_threshold, softmax,
                         softplus, softsign, weighted_l2_per_layer)
from .graph import ExprGraph, backward, eval_graph
from .layers import dense, dense_param_count, glorot, ones_row
from .optim import OptimizerState, optimizer_step
from .training import TrainConfig, fit

__all__ = [
    "ExprGraph", "eval_graph", "backward", "apply_activation", "softmax",
    "as_one_hot", "relu", "sigmoid", "softsign", "softplus", "soft_threshold",
    "loss", "mse", "cross_entropy", "weighted_l2_per_layer",
    "dense", "glorot", "ones_row", "dense_param_count",
    "OptimizerState", "optimizer_step", "TrainConfig", "fit",
    "save_checkpoint", "load_checkpoint",
]
