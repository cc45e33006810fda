"""Finite-memory sequence detection on factor graphs."""

from .brute import brute_force_map
from .learned import (LearnedFgModel, WindowPosterior, learn_transition_histogram,
                      learn_window_prior, learned_fg_detect, learned_fg_train,
                      train_window_posterior)
from .nodes import AnalyticFunctionNode, LearnedFunctionNode, window_values
from .sum_product import MessageTable, model_map_detect, sp_map_detect

__all__ = [
    "AnalyticFunctionNode", "LearnedFunctionNode", "window_values",
    "MessageTable", "model_map_detect", "sp_map_detect",
    "brute_force_map",
    "LearnedFgModel", "WindowPosterior", "learn_transition_histogram",
    "learn_window_prior", "learned_fg_detect", "learned_fg_train",
    "train_window_posterior",
]
