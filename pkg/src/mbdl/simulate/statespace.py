"""Linear-Gaussian state-space models.

    s_i = F s_{i-1} + w_i,   w_i ~ N(0, W)
    x_i = H s_i + r_i,       r_i ~ N(0, R)

with a known initial state s_0.  Covariances must be symmetric positive
definite; their Cholesky factors are taken once at construction and all
later solves go through them (no explicit inverses).
"""

from dataclasses import dataclass, field

import numpy as np

from ..linalg import spd_cholesky
from .rng import CounterRng


@dataclass
class StateSpaceModel:
    transition: np.ndarray           # F (d_s, d_s)
    observation: np.ndarray          # H (d_x, d_s)
    process_cov: np.ndarray          # W (d_s, d_s)
    obs_cov: np.ndarray              # R (d_x, d_x)
    initial_state: np.ndarray        # s_0 (d_s,)
    chol_w: np.ndarray = field(init=False, repr=False)
    chol_r: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        F = np.ascontiguousarray(self.transition, dtype=np.float64)
        H = np.ascontiguousarray(self.observation, dtype=np.float64)
        W = np.ascontiguousarray(self.process_cov, dtype=np.float64)
        R = np.ascontiguousarray(self.obs_cov, dtype=np.float64)
        s0 = np.ascontiguousarray(self.initial_state, dtype=np.float64)
        d_s = F.shape[0]
        if F.shape != (d_s, d_s):
            raise ValueError("transition matrix must be square")
        d_x = H.shape[0]
        if H.shape != (d_x, d_s):
            raise ValueError(
                f"observation matrix must be (d_x, {d_s}), got {H.shape}")
        if W.shape != (d_s, d_s) or R.shape != (d_x, d_x):
            raise ValueError("covariance shapes do not match the model")
        if s0.shape != (d_s,):
            raise ValueError(f"initial state must be ({d_s},)")
        self.transition, self.observation = F, H
        self.process_cov, self.obs_cov, self.initial_state = W, R, s0
        self.chol_w = spd_cholesky(W, what="process covariance")
        self.chol_r = spd_cholesky(R, what="observation covariance")

    @property
    def d_state(self):
        return self.transition.shape[0]

    @property
    def d_obs(self):
        return self.observation.shape[0]


def sample_state_space(model, T, seed):
    """Roll the model forward T steps; returns (S (T, d_s), X (T, d_x))."""
    if T < 1:
        raise ValueError("T must be >= 1")
    rng = CounterRng(seed)
    d_s, d_x = model.d_state, model.d_obs
    wn = rng.normal((T, d_s)) @ model.chol_w.T
    rn = rng.normal((T, d_x)) @ model.chol_r.T
    S = np.empty((T, d_s))
    s = model.initial_state
    for i in range(T):
        s = model.transition @ s + wn[i]
        S[i] = s
    X = S @ model.observation.T + rn
    return S, X
