"""State-space trajectory smoothing, exact and learned-augmented."""

from .augmented import (AugmentationNet, BlackboxRegressor,
                        build_smoother_graph, neural_augmented_smoother,
                        train_augmentation, train_blackbox_regressor,
                        zero_augmentation)
from .messages import kalman_messages, log_joint, message_sum
from .smoother import batch_map, gradient_smoother

__all__ = [
    "kalman_messages", "log_joint", "message_sum",
    "batch_map", "gradient_smoother",
    "AugmentationNet", "BlackboxRegressor", "build_smoother_graph",
    "neural_augmented_smoother", "train_augmentation",
    "train_blackbox_regressor", "zero_augmentation",
]
