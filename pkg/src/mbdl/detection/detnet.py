"""Deep unfolded projected gradient detection.

Each of the Q layers mimics one projected gradient step but with the step
sizes, the lifting into a hidden layer, and the soft projection all learned:

    pre_q  = (I + d2_q H^T H) s_{q-1} - d1_q H^T x
    z_q    = relu(W1_q pre_q + b1_q)
    s_q    = softsign(W2_q z_q + b2_q)

The channel matrix enters every layer, so a trained network is tied to the
H it was trained for.  Training minimizes a layer-weighted squared error,
sum_q log(1 + q) * mse(s_q, s), which keeps early layers from going slack.
"""

from dataclasses import dataclass, field

import numpy as np

from ..autodiff import (ExprGraph, TrainConfig, dense, fit, glorot, ones_row,
                        relu, softsign)
from ..linalg import power_iteration_norm
from ..simulate import CounterRng
from .pgd import project_to_constellation


@dataclass
class DetNetParams:
    """Per-layer weights; biases keep their column shape (h, 1)."""
    w1: list = field(default_factory=list)
    b1: list = field(default_factory=list)
    w2: list = field(default_factory=list)
    b2: list = field(default_factory=list)
    delta1: list = field(default_factory=list)
    delta2: list = field(default_factory=list)

    @property
    def n_layers(self):
        return len(self.w1)


def detnet_forward(params, x, model, initial=None):
    """Per-layer soft outputs; x is (B, N), each output is (B, K)."""
    H = model.matrix
    HtH = H.T @ H
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    xc = X.T
    eye = np.eye(model.n_users)
    if initial is None:
        s = np.zeros((model.n_users, X.shape[0]))
    else:
        s = np.broadcast_to(
            np.asarray(initial, dtype=np.float64)[:, None],
            (model.n_users, X.shape[0])).copy()
    htx = H.T @ xc
    outs = []
    for q in range(params.n_layers):
        pre = (eye + params.delta2[q] * HtH) @ s - params.delta1[q] * htx
        z = relu(params.w1[q] @ pre + params.b1[q])
        s = softsign(params.w2[q] @ z + params.b2[q])
        outs.append(s[:, 0] if single else s.T)
    return outs


def detnet_detect(params, x, model):
    """Hard decisions from the deepest layer."""
    soft = detnet_forward(params, x, model)[-1]
    return project_to_constellation(soft, model.constellation)


def build_detnet_graph(model, n_layers, hidden, batch_size, seed=0):
    """Training graph: inputs "x" (N, B) and "target" (K, B), root "loss"."""
    K, N = model.n_users, model.n_out
    H = model.matrix
    rng = CounterRng(seed)
    step = 1.0 / power_iteration_norm(H.T @ H)
    g = ExprGraph()
    x = g.input("x", (N, batch_size))
    target = g.input("target", (K, batch_size))
    hth = g.constant(H.T @ H, name="hth")
    ht = g.constant(H.T, name="ht")
    eye = g.constant(np.eye(K), name="eye")
    ones = ones_row(g, batch_size)
    s = g.constant(np.zeros((K, batch_size)), name="s_init")
    htx = g.matmul(ht, x, name="htx")
    loss = None
    for q in range(n_layers):
        w1 = g.parameter(f"w1_{q}", glorot(rng, hidden, K))
        b1 = g.parameter(f"b1_{q}", np.zeros((hidden, 1)))
        w2 = g.parameter(f"w2_{q}", glorot(rng, K, hidden))
        b2 = g.parameter(f"b2_{q}", np.zeros((K, 1)))
        d1 = g.parameter(f"delta1_{q}", np.asarray(-step))
        d2 = g.parameter(f"delta2_{q}", np.asarray(-step))
        pre = g.sub(g.matmul(g.add(eye, g.mul(d2, hth)), s),
                    g.mul(d1, htx))
        z = g.relu(dense(g, pre, w1, b1, ones))
        s = g.softsign(dense(g, z, w2, b2, ones), name=f"s_{q}")
        term = g.smul(g.mse(s, target), np.log(q + 2.0))
        loss = term if loss is None else g.add(loss, term)
    g.smul(loss, 1.0, name="loss")
    return g


def params_from_graph(graph, n_layers):
    params = DetNetParams()
    values = graph.get_params()
    for q in range(n_layers):
        params.w1.append(values[f"w1_{q}"].copy())
        params.b1.append(values[f"b1_{q}"].copy())
        params.w2.append(values[f"w2_{q}"].copy())
        params.b2.append(values[f"b2_{q}"].copy())
        params.delta1.append(float(values[f"delta1_{q}"]))
        params.delta2.append(float(values[f"delta2_{q}"]))
    return params


def detnet_train(S, X, model, n_layers=10, hidden=None, config=None):
    """Fit the unfolded detector to transmitted/received pairs.

    S is (n, K) transmitted symbols, X is (n, N) observations.  Returns
    (DetNetParams, per-epoch losses).
    """
    config = config or TrainConfig()
    if hidden is None:
        hidden = 4 * model.n_users
    S = np.asarray(S, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if S.shape[0] != X.shape[0]:
        raise ValueError("sample counts differ between symbols and observations")
    graph = build_detnet_graph(model, n_layers, hidden, config.batch_size,
                               seed=config.seed)
    rng = CounterRng(config.seed).spawn("shuffle")

    def bind_batch(idx):
        return {"x": X[idx].T, "target": S[idx].T}

    losses = fit(graph, bind_batch, S.shape[0], config, rng, loss_node="loss")
    return params_from_graph(graph, n_layers), losses
