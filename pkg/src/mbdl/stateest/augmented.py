"""Smoothing with a learned correction riding on the exact messages.

When the assumed linear model is only an approximation (a linearized
nonlinear system, say), the message sum points in a systematically wrong
direction.  A small shared network looks at everything local to a node --
the three messages, the current estimate, and the observation -- and emits
a correction that is added to the message sum before the ascent step:

    s_t <- s_t + step * (past_t + future_t + obs_t + eps_t)
    eps_t = net(past_t, future_t, obs_t, s_t, x_t)

A zero network reproduces the plain fixed-step smoother exactly, which
pins down the semantics and is asserted bitwise in the tests.  Training
unrolls Q iterations over whole trajectories and weights later iterates
more: loss = sum_q (q / Q) mse(s^(q), s).

The black-box baseline with the same parameter budget ignores the model
entirely and regresses s_t from the observation window
(x_{t-1}, x_t, x_{t+1}); it is the control showing what the messages buy.
"""

from dataclasses import dataclass

import numpy as np

from ..autodiff import ExprGraph, TrainConfig, dense, fit, glorot, ones_row, relu
from ..linalg import cho_solve
from ..simulate import CounterRng
from .messages import kalman_messages


@dataclass
class AugmentationNet:
    """Shared per-node correction; input (4 d_s + d_x,), output (d_s,)."""
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def correction(self, features):
        """features (T, 4 d_s + d_x) -> (T, d_s)."""
        hidden = relu(self.w1 @ features.T + self.b1)
        return (self.w2 @ hidden + self.b2).T


def zero_augmentation(model, hidden=13):
    """A network whose correction is identically zero."""
    d, dx = model.d_state, model.d_obs
    return AugmentationNet(np.zeros((hidden, 4 * d + dx)),
                           np.zeros((hidden, 1)),
                           np.zeros((d, hidden)), np.zeros((d, 1)))


def neural_augmented_smoother(xs, model, net, s0=None, iters=50, step=0.05):
    """Fixed-step ascent on messages plus the learned correction."""
    xs = np.asarray(xs, dtype=np.float64)
    shat = np.zeros((xs.shape[0], model.d_state))
    for _ in range(iters):
        past, future, obs = kalman_messages(shat, xs, model, s0)
        feats = np.concatenate([past, future, obs, shat, xs], axis=1)
        shat = shat + step * (past + future + obs + net.correction(feats))
    return shat


def build_smoother_graph(model, n_seqs, T, n_iters, step, hidden, seed=0):
    """Unrolled training graph over ``n_seqs`` trajectories of length T.

    Inputs: "x" (d_x, n_seqs*T), "s0cols" (d_s, n_seqs*T) holding each
    trajectory's F s_0 contribution at its first column and zeros
    elsewhere, "target" (d_s, n_seqs*T).  Root "loss"; the q-th iterate is
    node "shat_q".
    """
    d, dx = model.d_state, model.d_obs
    width = n_seqs * T
    w_inv = cho_solve(model.chol_w, np.eye(d))
    r_inv = cho_solve(model.chol_r, np.eye(dx))
    rng = CounterRng(seed)
    g = ExprGraph()
    x = g.input("x", (dx, width))
    s0cols = g.input("s0cols", (d, width))
    target = g.input("target", (d, width))
    f_mat = g.constant(model.transition, name="f_mat")
    winv = g.constant(w_inv, name="winv")
    ft_winv = g.constant(model.transition.T @ w_inv, name="ft_winv")
    ht_rinv = g.constant(model.observation.T @ r_inv, name="ht_rinv")
    h_mat = g.constant(model.observation, name="h_mat")
    end_mask = np.ones((d, width))
    end_mask[:, T - 1::T] = 0.0
    m_end = g.constant(end_mask, name="end_mask")
    ones = ones_row(g, width)
    w1 = g.parameter("w1", glorot(rng, hidden, 4 * d + dx))
    b1 = g.parameter("b1", np.zeros((hidden, 1)))
    w2 = g.parameter("w2", glorot(rng, d, hidden))
    b2 = g.parameter("b2", np.zeros((d, 1)))
    shat = g.constant(np.zeros((d, width)), name="shat_0")
    loss = None
    for q in range(1, n_iters + 1):
        prev = g.add(g.matmul(f_mat, g.shift_cols(shat, 1, period=T)), s0cols)
        past = g.sub(g.matmul(winv, prev), g.matmul(winv, shat))
        ahead = g.shift_cols(shat, -1, period=T)
        future = g.mul(g.matmul(ft_winv,
                                g.sub(ahead, g.matmul(f_mat, shat))),
                       m_end)
        obs = g.matmul(ht_rinv, g.sub(x, g.matmul(h_mat, shat)))
        feats = g.concat_rows([past, future, obs, shat, x])
        eps = dense(g, g.relu(dense(g, feats, w1, b1, ones)), w2, b2, ones)
        total = g.add(g.add(g.add(past, future), obs), eps)
        shat = g.add(shat, g.smul(total, step), name=f"shat_{q}")
        term = g.smul(g.mse(shat, target), q / n_iters)
        loss = term if loss is None else g.add(loss, term)
    g.smul(loss, 1.0, name="loss")
    return g


def _sequence_bindings(X, S, model, s0s, T):
    d = model.d_state
    n = X.shape[0]
    x_cols = X.reshape(n * T, -1).T
    target = S.reshape(n * T, d).T
    s0cols = np.zeros((d, n * T))
    s0cols[:, ::T] = (s0s @ model.transition.T).T
    return x_cols, s0cols, target


def train_augmentation(S, X, model, s0s=None, n_iters=30, step=0.05,
                       hidden=13, config=None):
    """Fit the correction net on (trajectory, observation) pairs.

    S is (n, T, d_s), X is (n, T, d_x); s0s is (n, d_s) initial states
    (default: the model's initial state for every trajectory).  The batch
    unit is whole trajectories.  Returns (AugmentationNet, losses).
    """
    config = config or TrainConfig()
    S = np.asarray(S, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    n, T = S.shape[0], S.shape[1]
    if s0s is None:
        s0s = np.tile(model.initial_state, (n, 1))
    s0s = np.asarray(s0s, dtype=np.float64)
    g = build_smoother_graph(model, config.batch_size, T, n_iters, step,
                             hidden, seed=config.seed)
    shuffle = CounterRng(config.seed).spawn("shuffle")

    def bind_batch(idx):
        x_cols, s0cols, target = _sequence_bindings(
            X[idx], S[idx], model, s0s[idx], T)
        return {"x": x_cols, "s0cols": s0cols, "target": target}

    losses = fit(g, bind_batch, n, config, shuffle, loss_node="loss")
    v = g.get_params()
    net = AugmentationNet(v["w1"].copy(), v["b1"].copy(), v["w2"].copy(),
                          v["b2"].copy())
    return net, losses


@dataclass
class BlackboxRegressor:
    """s_t from the zero-padded window (x_{t-1}, x_t, x_{t+1})."""
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 2
        batch = X[None] if single else X
        feats = _window_features(batch)
        hidden = relu(self.w1 @ feats.T + self.b1)
        out = (self.w2 @ hidden + self.b2).T
        out = out.reshape(batch.shape[0], batch.shape[1], -1)
        return out[0] if single else out


def _window_features(X):
    """(n, T, d_x) -> (n*T, 3 d_x) with zero padding at both ends."""
    before = np.concatenate([np.zeros_like(X[:, :1]), X[:, :-1]], axis=1)
    after = np.concatenate([X[:, 1:], np.zeros_like(X[:, :1])], axis=1)
    return np.concatenate([before, X, after], axis=2).reshape(
        X.shape[0] * X.shape[1], -1)


def train_blackbox_regressor(S, X, hidden=19, config=None):
    """Window regression baseline; same interface as the hybrid smoother.

    With the default widths (hidden 13 for the correction net, 19 here, at
    d_s = d_x = 3) the two have identical parameter counts, so comparisons
    are at matched capacity.  Returns (BlackboxRegressor, losses).
    """
    config = config or TrainConfig()
    S = np.asarray(S, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    d = S.shape[2]
    feats = _window_features(X)
    targets = S.reshape(-1, d)
    rng = CounterRng(config.seed)
    g = ExprGraph()
    fin = g.input("f", (feats.shape[1], config.batch_size))
    target = g.input("target", (d, config.batch_size))
    ones = ones_row(g, config.batch_size)
    w1 = g.parameter("w1", glorot(rng, hidden, feats.shape[1]))
    b1 = g.parameter("b1", np.zeros((hidden, 1)))
    w2 = g.parameter("w2", glorot(rng, d, hidden))
    b2 = g.parameter("b2", np.zeros((d, 1)))
    out = dense(g, g.relu(dense(g, fin, w1, b1, ones)), w2, b2, ones)
    g.mse(out, target, name="loss")
    shuffle = CounterRng(config.seed).spawn("shuffle")

    def bind_batch(idx):
        return {"f": feats[idx].T, "target": targets[idx].T}

    losses = fit(g, bind_batch, feats.shape[0], config, shuffle,
                 loss_node="loss")
    v = g.get_params()
    return BlackboxRegressor(v["w1"].copy(), v["b1"].copy(), v["w2"].copy(),
                             v["b2"].copy()), losses
