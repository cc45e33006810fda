"""Interference cancellation with pluggable per-user soft decoders.

The cancellation scaffold is the one from sic.py: Q rounds, each round
recomputing every user's symbol PMF from the raw observation plus the other
users' PMFs of the previous round.  What varies is the block that maps
(observation, other PMFs) to a PMF.  AnalyticSicBlock calls the exact
Gaussian soft decode, so a net built from those blocks reproduces the
classical detector bit for bit.  DenseBlock is a small learned classifier
that needs no channel model at all, which is what makes the detector usable
when the Gaussian assumption is wrong or the channel is only known through
samples.

Blocks consume PMFs of the other users in ascending user order; the
observation is passed raw and each DenseBlock applies its own stored
standardization.
"""

from dataclasses import dataclass, field

import numpy as np

from ..autodiff import (ExprGraph, TrainConfig, as_one_hot, dense, fit,
                        glorot, ones_row, relu, softmax)
from ..simulate import CounterRng
from .sic import soft_decode_user, uniform_pmfs


def standardization(X):
    """Per-feature mean and scale; scale floors at 1e-9 to stay invertible."""
    X = np.asarray(X, dtype=np.float64)
    mean = X.mean(axis=0)
    scale = np.maximum(X.std(axis=0), 1e-9)
    return mean, scale


@dataclass
class DenseBlock:
    """One hidden layer, relu, softmax over the constellation."""
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    x_mean: np.ndarray
    x_scale: np.ndarray

    def pmfs(self, x, others):
        xs = (x - self.x_mean) / self.x_scale
        feat = np.concatenate([xs, others], axis=1).T
        hidden = relu(self.w1 @ feat + self.b1)
        return softmax(self.w2 @ hidden + self.b2).T


@dataclass
class AnalyticSicBlock:
    """Exact Gaussian soft decode for one user; needs the channel model."""
    model: object
    user: int

    def pmfs(self, x, others):
        n_sym = len(self.model.constellation)
        n_users = self.model.n_users
        full = np.empty((x.shape[0], n_users, n_sym))
        idx = [l for l in range(n_users) if l != self.user]
        full[:, idx, :] = others.reshape(x.shape[0], n_users - 1, n_sym)
        full[:, self.user, :] = 1.0 / n_sym
        return soft_decode_user(x, full, self.model, self.user)


@dataclass
class DeepSicNet:
    """Q rounds x K users of soft-decode blocks plus the constellation."""
    constellation: tuple
    n_users: int
    blocks: list = field(default_factory=list)

    @property
    def n_iters(self):
        return len(self.blocks)


def _other_pmfs(pmfs, user):
    idx = [l for l in range(pmfs.shape[1]) if l != user]
    return pmfs[:, idx, :].reshape(pmfs.shape[0], -1)


def deepsic_soft(net, x):
    """PMFs after each round; x is (B, N), entries are (B, K, |S|)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    pmfs = uniform_pmfs(X.shape[0], net.n_users, len(net.constellation))
    rounds = []
    for layer in net.blocks:
        pmfs = np.stack(
            [layer[k].pmfs(X, _other_pmfs(pmfs, k))
             for k in range(net.n_users)], axis=1)
        rounds.append(pmfs[0] if single else pmfs)
    return rounds


def deepsic_detect(net, x):
    """Hard decisions from the final round; ties pick the smaller symbol."""
    pmfs = deepsic_soft(net, x)[-1]
    points = np.asarray(net.constellation, dtype=np.float64)
    return points[np.argmax(pmfs, axis=-1)]


def analytic_deepsic(model, n_iters=5):
    """Classical detector expressed in the pluggable scaffold."""
    layers = [[AnalyticSicBlock(model, k) for k in range(model.n_users)]
              for _ in range(n_iters)]
    return DeepSicNet(tuple(model.constellation), model.n_users, layers)


def symbol_indices(S, constellation):
    points = np.asarray(constellation, dtype=np.float64)
    idx = np.searchsorted(points, np.asarray(S, dtype=np.float64))
    idx = np.clip(idx, 0, len(points) - 1)
    if not np.allclose(points[idx], S):
        raise ValueError("symbols do not match the constellation")
    return idx


def _train_one_block(feats, labels_idx, hidden, n_sym, config, seed):
    """Fit a single DenseBlock classifier on prepared features."""
    rng = CounterRng(seed)
    g = ExprGraph()
    feat = g.input("feat", (feats.shape[1], config.batch_size))
    labels = g.input("labels", (n_sym, config.batch_size))
    w1 = g.parameter("w1", glorot(rng, hidden, feats.shape[1]))
    b1 = g.parameter("b1", np.zeros((hidden, 1)))
    w2 = g.parameter("w2", glorot(rng, n_sym, hidden))
    b2 = g.parameter("b2", np.zeros((n_sym, 1)))
    ones = ones_row(g, config.batch_size)
    h = g.relu(dense(g, feat, w1, b1, ones))
    probs = g.softmax(dense(g, h, w2, b2, ones))
    g.cross_entropy(probs, labels, name="loss")
    fit_rng = CounterRng(seed).spawn("shuffle")

    def bind_batch(idx):
        return {"feat": feats[idx].T,
                "labels": as_one_hot(labels_idx[idx], n_sym)}

    losses = fit(g, bind_batch, feats.shape[0], config, fit_rng,
                 loss_node="loss")
    values = g.get_params()
    return values, losses


def deepsic_train(S, X, constellation, n_iters=3, hidden=None, config=None,
                  mode="sequential"):
    """Fit the learned detector from transmitted/received pairs.

    S is (n, K), X is (n, N).  mode "sequential" trains the K * Q blocks one
    at a time in round order, each against the true symbols, re-propagating
    PMFs after every round; mode "end2end" trains all blocks jointly against
    the final round's cross-entropy.  Returns (DeepSicNet, losses) where
    losses is per-block (sequential) or per-epoch (end2end).
    """
    config = config or TrainConfig()
    S = np.asarray(S, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if S.shape[0] != X.shape[0]:
        raise ValueError("sample counts differ between symbols and observations")
    n_users = S.shape[1]
    n_sym = len(constellation)
    if hidden is None:
        hidden = 16 * (n_users - 1) * n_sym
    if mode == "sequential":
        return _train_sequential(S, X, constellation, n_iters, hidden, config)
    if mode == "end2end":
        return _train_end2end(S, X, constellation, n_iters, hidden, config)
    raise ValueError(f"unknown training mode: {mode}")


def _train_sequential(S, X, constellation, n_iters, hidden, config):
    n_users = S.shape[1]
    n_sym = len(constellation)
    mean, scale = standardization(X)
    xs = (X - mean) / scale
    labels = symbol_indices(S, constellation)
    pmfs = uniform_pmfs(X.shape[0], n_users, n_sym)
    layers = []
    losses = []
    for q in range(n_iters):
        layer = []
        for k in range(n_users):
            feats = np.concatenate([xs, _other_pmfs(pmfs, k)], axis=1)
            values, block_losses = _train_one_block(
                feats, labels[:, k], hidden, n_sym, config,
                seed=config.seed + 7919 * (q * n_users + k) + 1)
            layer.append(DenseBlock(values["w1"], values["b1"],
                                    values["w2"], values["b2"], mean, scale))
            losses.append(block_losses[-1])
        pmfs = np.stack(
            [layer[k].pmfs(X, _other_pmfs(pmfs, k))
             for k in range(n_users)], axis=1)
        layers.append(layer)
    return DeepSicNet(tuple(constellation), n_users, layers), losses


def _train_end2end(S, X, constellation, n_iters, hidden, config):
    n_users = S.shape[1]
    n_sym = len(constellation)
    n_out = X.shape[1]
    mean, scale = standardization(X)
    xs_all = (X - mean) / scale
    labels = symbol_indices(S, constellation)
    rng = CounterRng(config.seed)
    batch = config.batch_size
    g = ExprGraph()
    x = g.input("x", (n_out, batch))
    targets = [g.input(f"y_{k}", (n_sym, batch)) for k in range(n_users)]
    ones = ones_row(g, batch)
    uniform = g.constant(np.full((n_sym, batch), 1.0 / n_sym), name="p_init")
    pmf_nodes = [uniform] * n_users
    for q in range(n_iters):
        new_nodes = []
        for k in range(n_users):
            w1 = g.parameter(f"w1_{q}_{k}",
                             glorot(rng, hidden, n_out + (n_users - 1) * n_sym))
            b1 = g.parameter(f"b1_{q}_{k}", np.zeros((hidden, 1)))
            w2 = g.parameter(f"w2_{q}_{k}", glorot(rng, n_sym, hidden))
            b2 = g.parameter(f"b2_{q}_{k}", np.zeros((n_sym, 1)))
            feat = g.concat_rows(
                [x] + [pmf_nodes[l] for l in range(n_users) if l != k])
            h = g.relu(dense(g, feat, w1, b1, ones))
            new_nodes.append(g.softmax(dense(g, h, w2, b2, ones),
                                       name=f"p_{q}_{k}"))
        pmf_nodes = new_nodes
    total = None
    for k in range(n_users):
        term = g.cross_entropy(pmf_nodes[k], targets[k])
        total = term if total is None else g.add(total, term)
    g.smul(total, 1.0, name="loss")
    fit_rng = CounterRng(config.seed).spawn("shuffle")

    def bind_batch(idx):
        bindings = {"x": xs_all[idx].T}
        for k in range(n_users):
            bindings[f"y_{k}"] = as_one_hot(labels[idx, k], n_sym)
        return bindings

    losses = fit(g, bind_batch, X.shape[0], config, fit_rng, loss_node="loss")
    values = g.get_params()
    layers = []
    for q in range(n_iters):
        layer = [DenseBlock(values[f"w1_{q}_{k}"], values[f"b1_{q}_{k}"],
                            values[f"w2_{q}_{k}"], values[f"b2_{q}_{k}"],
                            mean, scale)
                 for k in range(n_users)]
        layers.append(layer)
    return DeepSicNet(tuple(constellation), n_users, layers), losses
