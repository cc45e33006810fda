"""Learned denoisers for plug-in splitting.

A denoiser here is any map R^N -> R^N; pnp_admm treats it as the proximal
step of an implicit regularizer.  This module trains the simplest useful
one: a single-hidden-layer residual net fitted to (clean + noise, clean)
pairs at a stated noise level.
"""

from dataclasses import dataclass

import numpy as np

from ..autodiff import ExprGraph, TrainConfig, dense, fit, glorot, ones_row
from ..autodiff.functional import relu
from ..simulate import CounterRng


@dataclass
class DenoiserNet:
    """v -> v + W2 relu(W1 v + b1) + b2, learned at ``noise_std``."""
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    noise_std: float

    def denoise(self, v):
        v = np.asarray(v, dtype=np.float64)
        single = v.ndim == 1
        cols = (v[None, :] if single else v).T
        out = cols + self.w2 @ relu(self.w1 @ cols + self.b1) + self.b2
        return out[:, 0] if single else out.T

    def __call__(self, v):
        return self.denoise(v)


def train_denoiser(clean, noise_std, hidden=None, copies=4, config=None):
    """Fit the residual denoiser on noisy copies of clean signal samples.

    clean is (B, n).  Each sample is corrupted ``copies`` times with fresh
    Gaussian noise at ``noise_std``.  Returns (DenoiserNet, losses).
    """
    if noise_std <= 0:
        raise ValueError("noise_std must be positive")
    config = config or TrainConfig()
    clean = np.asarray(clean, dtype=np.float64)
    n = clean.shape[1]
    if hidden is None:
        hidden = 4 * n
    rng = CounterRng(config.seed)
    noisy = np.tile(clean, (copies, 1))
    targets = noisy.copy()
    noisy = noisy + noise_std * rng.normal(noisy.shape)
    g = ExprGraph()
    v = g.input("v", (n, config.batch_size))
    target = g.input("target", (n, config.batch_size))
    ones = ones_row(g, config.batch_size)
    w1 = g.parameter("w1", glorot(rng, hidden, n))
    b1 = g.parameter("b1", np.zeros((hidden, 1)))
    w2 = g.parameter("w2", glorot(rng, n, hidden))
    b2 = g.parameter("b2", np.zeros((n, 1)))
    h = g.relu(dense(g, v, w1, b1, ones))
    out = g.add(v, dense(g, h, w2, b2, ones))
    g.mse(out, target, name="loss")
    shuffle = CounterRng(config.seed).spawn("shuffle")

    def bind_batch(idx):
        return {"v": noisy[idx].T, "target": targets[idx].T}

    losses = fit(g, bind_batch, noisy.shape[0], config, shuffle,
                 loss_node="loss")
    values = g.get_params()
    return DenoiserNet(values["w1"].copy(), values["b1"].copy(),
                       values["w2"].copy(), values["b2"].copy(),
                       float(noise_std)), losses
