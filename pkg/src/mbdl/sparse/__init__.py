"""Sparse recovery: L1 solvers, learned encoders, and plug-in splitting."""

from .admm import admm_solve, pnp_admm
from .dcea import (DceaParams, build_dcea_graph, coding_objective,
                   collapse_to_kernels, conv_dictionary, dcea_alternating,
                   dcea_train, decode_batch, dense_autoencoder_param_count,
                   encode_batch, params_from_dcea_graph, reconstruction_loss)
from .denoiser import DenoiserNet, train_denoiser
from .generative import (GeneratorPrior, csgm_recover, generator_forward,
                         linear_generator_recover, pretrain_generator)
from .lasso import LassoProblem, coordinate_descent, ista, lasso_objective

__all__ = [
    "LassoProblem", "coordinate_descent", "ista", "lasso_objective",
    "admm_solve", "pnp_admm",
    "DceaParams", "build_dcea_graph", "coding_objective",
    "collapse_to_kernels", "conv_dictionary", "dcea_alternating",
    "dcea_train", "decode_batch", "dense_autoencoder_param_count",
    "encode_batch", "params_from_dcea_graph", "reconstruction_loss",
    "DenoiserNet", "train_denoiser",
    "GeneratorPrior", "csgm_recover", "generator_forward",
    "linear_generator_recover", "pretrain_generator",
]
