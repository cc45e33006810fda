"""Simulators: channels, Markov sequences, state-space models, Lorenz."""

from .channels import (BPSK, GaussianMimoChannel, PoissonChannel,
                       perturb_channel, sample_gaussian_channel,
                       sample_poisson_channel, snr_db_to_noise_std,
                       snr_db_to_rate_gain)
from .datasets import read_dataset, write_dataset
from .lorenz import (ATTRACTOR_REFERENCE, lorenz_jacobian, lorenz_rhs,
                     lorenz_taylor_model, rk4_step,
                     sample_lorenz_trajectories, taylor_transition)
from .markov import (GaussianIsiEmission, MarkovSequenceModel,
                     PoissonIsiEmission, all_states, index_state,
                     sample_markov_sequence, shift_state, state_index,
                     uniform_transition)
from .rng import CounterRng, derive_seed
from .statespace import StateSpaceModel, sample_state_space

__all__ = [
    "BPSK", "GaussianMimoChannel", "PoissonChannel", "sample_gaussian_channel",
    "sample_poisson_channel", "perturb_channel", "snr_db_to_noise_std",
    "snr_db_to_rate_gain", "CounterRng", "derive_seed", "MarkovSequenceModel",
    "GaussianIsiEmission", "PoissonIsiEmission", "sample_markov_sequence",
    "uniform_transition", "state_index", "index_state", "all_states",
    "shift_state", "StateSpaceModel", "sample_state_space", "rk4_step",
    "lorenz_rhs", "lorenz_jacobian", "taylor_transition", "lorenz_taylor_model",
    "sample_lorenz_trajectories", "ATTRACTOR_REFERENCE", "read_dataset",
    "write_dataset",
]
