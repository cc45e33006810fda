"""Finite-alphabet detectors: exhaustive, iterative, and learned."""

from .deepsic import (AnalyticSicBlock, DeepSicNet, DenseBlock,
                      analytic_deepsic, deepsic_detect, deepsic_soft,
                      deepsic_train, standardization, symbol_indices)
from .detnet import (DetNetParams, build_detnet_graph, detnet_detect,
                     detnet_forward, detnet_train, params_from_graph)
from .map_oracle import enumerate_symbol_vectors, map_exhaustive
from .pgd import pgd_detect, project_to_constellation
from .sic import (pmf_moments, sic_detect, sic_soft_decode, soft_decode_user,
                  uniform_pmfs)

__all__ = [
    "enumerate_symbol_vectors", "map_exhaustive",
    "pgd_detect", "project_to_constellation",
    "pmf_moments", "sic_detect", "sic_soft_decode", "soft_decode_user",
    "uniform_pmfs",
    "DetNetParams", "build_detnet_graph", "detnet_detect", "detnet_forward",
    "detnet_train", "params_from_graph",
    "AnalyticSicBlock", "DeepSicNet", "DenseBlock", "analytic_deepsic",
    "deepsic_detect", "deepsic_soft", "deepsic_train", "standardization",
    "symbol_indices",
]
