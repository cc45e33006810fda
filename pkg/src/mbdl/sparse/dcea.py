"""Convolutional sparse coding with an exponential-family observation model.

The dictionary is C causal convolution kernels of length L, expanded into
the (n, C*n) matrix whose c-th block has entry k[c, i-j] at (i, j).  A code
s in R^{C*n} decodes to a mean mu = g(W s) with link g either identity
("linear", Gaussian data) or a clamped exp ("exp", count data).  Encoding
runs a fixed number of proximal gradient steps on

    f(s) + sum_c lam_c ||s_c||_1,
    f(s) = 0.5 ||x - W s||^2         (linear)
    f(s) = sum_i (mu_i - x_i log mu_i)  (exp)

whose gradient is W^T (mu - x) in both cases, so one iteration is

    s <- T_b(s + step * W^T (x - g(W s))),   b_c = step * lam_c.

encode_batch is the single implementation of that loop.  The classical
alternating minimizer calls it between dictionary updates, and the learned
variant unfolds the very same iteration with the thresholds b trained, so
the two agree bit for bit on identical parameters.  Learned parameters are
just the kernels and one threshold per channel: C*L + C numbers.
"""

from dataclasses import dataclass

import numpy as np

from ..autodiff import ExprGraph, TrainConfig, fit, soft_threshold, softplus
from ..autodiff.functional import exp_clamped
from ..simulate import CounterRng

EXP_CLAMP = 50.0


@dataclass
class DceaParams:
    kernels: np.ndarray      # (C, L)
    thresholds: np.ndarray   # (C,) soft-threshold levels b_c
    step: float
    n_iters: int
    signal_len: int
    link: str = "linear"

    def __post_init__(self):
        self.kernels = np.asarray(self.kernels, dtype=np.float64)
        self.thresholds = np.asarray(self.thresholds, dtype=np.float64)
        if self.kernels.ndim != 2:
            raise ValueError("kernels must be (C, L)")
        if self.thresholds.shape != (self.kernels.shape[0],):
            raise ValueError("one threshold per kernel required")
        if self.link not in ("linear", "exp"):
            raise ValueError(f"unknown link: {self.link}")

    @property
    def n_kernels(self):
        return self.kernels.shape[0]

    @property
    def n_params(self):
        return self.kernels.size + self.thresholds.size


def conv_dictionary(kernels, n):
    """Expand (C, L) kernels into the (n, C*n) causal convolution matrix."""
    kernels = np.asarray(kernels, dtype=np.float64)
    c, ell = kernels.shape
    if ell > n:
        raise ValueError(f"kernel length {ell} exceeds signal length {n}")
    out = np.zeros((n, c * n))
    idx = np.arange(n)
    for ci in range(c):
        for t in range(ell):
            rows = idx[t:]
            out[rows, ci * n + rows - t] = kernels[ci, t]
    return out


def collapse_to_kernels(full, n_kernels, kernel_len):
    """Project an (n, C*n) matrix onto convolution structure.

    Least-squares projection onto the span of conv_dictionary: average each
    in-band diagonal, zero everything else.  Returns (C, L) kernels.
    """
    n = full.shape[0]
    idx = np.arange(n)
    kernels = np.zeros((n_kernels, kernel_len))
    for ci in range(n_kernels):
        block = full[:, ci * n:(ci + 1) * n]
        for t in range(kernel_len):
            rows = idx[t:]
            kernels[ci, t] = block[rows, rows - t].mean()
    return kernels


def _decode_cols(W, s_cols, link):
    lin = W @ s_cols
    return exp_clamped(lin, EXP_CLAMP) if link == "exp" else lin


def _expanded_thresholds(params):
    return np.repeat(params.thresholds, params.signal_len)[:, None]


def encode_batch(X, params):
    """Run the proximal encoder; X is (B, n), returns codes (B, C*n)."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    cols = (X[None, :] if single else X).T
    if cols.shape[0] != params.signal_len:
        raise ValueError(f"signals have {cols.shape[0]} samples, "
                         f"dictionary expects {params.signal_len}")
    W = conv_dictionary(params.kernels, params.signal_len)
    thr = _expanded_thresholds(params)
    s = np.zeros((W.shape[1], cols.shape[1]))
    for _ in range(params.n_iters):
        residual = cols - _decode_cols(W, s, params.link)
        s = soft_threshold(s + params.step * (W.T @ residual), thr)
    return s[:, 0] if single else s.T


def decode_batch(codes, params):
    """Map codes (B, C*n) back to means (B, n)."""
    codes = np.asarray(codes, dtype=np.float64)
    single = codes.ndim == 1
    cols = (codes[None, :] if single else codes).T
    out = _decode_cols(conv_dictionary(params.kernels, params.signal_len),
                       cols, params.link)
    return out[:, 0] if single else out.T


def reconstruction_loss(X, codes, params):
    """Data term of the objective, summed over the batch."""
    mu = decode_batch(codes, params)
    X = np.asarray(X, dtype=np.float64)
    if params.link == "exp":
        return float(np.sum(mu - X * np.log(mu)))
    return float(0.5 * np.sum((X - mu) ** 2))


def coding_objective(X, codes, params, lam):
    penalty = np.repeat(np.asarray(lam, dtype=np.float64), params.signal_len)
    codes2 = np.atleast_2d(codes)
    return reconstruction_loss(X, codes, params) + float(
        np.sum(np.abs(codes2) @ penalty))


def dcea_alternating(X, n_kernels, kernel_len, lam, step=0.1,
                     encode_iters=30, outer_iters=20, dict_step=1.0,
                     seed=0, link="linear"):
    """Alternate proximal encoding with projected dictionary steps.

    The dictionary step is gradient descent on the data term followed by
    projection back to convolution structure, with the step halved until
    the full objective does not increase.  Returns (params, codes, history)
    where history[i] is the objective after outer round i.
    """
    X = np.asarray(X, dtype=np.float64)
    lam = np.broadcast_to(np.asarray(lam, dtype=np.float64),
                          (n_kernels,)).copy()
    rng = CounterRng(seed)
    kernels = rng.normal((n_kernels, kernel_len))
    kernels /= np.linalg.norm(kernels, axis=1, keepdims=True)
    params = DceaParams(kernels, step * lam, step, encode_iters,
                        X.shape[1], link)
    history = []
    codes = encode_batch(X, params)
    for _ in range(outer_iters):
        current = coding_objective(X, codes, params, lam)
        W = conv_dictionary(params.kernels, params.signal_len)
        mu = decode_batch(codes, params)
        grad_full = (mu - X).T @ codes
        tau = dict_step
        for _ in range(40):
            trial = collapse_to_kernels(W - tau * grad_full,
                                        n_kernels, kernel_len)
            trial_params = DceaParams(trial, params.thresholds, step,
                                      encode_iters, params.signal_len, link)
            if coding_objective(X, codes, trial_params, lam) <= current:
                params = trial_params
                break
            tau *= 0.5
        codes = encode_batch(X, params)
        history.append(coding_objective(X, codes, params, lam))
    return params, codes, history


def build_dcea_graph(signal_len, n_kernels, kernel_len, n_iters, step,
                     batch_size, link="linear", seed=0):
    """Unfolded encoder graph; input "x" (n, B), code node "code", root "loss".

    Thresholds are softplus(beta) so they stay positive under gradient
    steps; kernels and beta are the only parameters.
    """
    rng = CounterRng(seed)
    init = rng.normal((n_kernels, kernel_len))
    init /= np.linalg.norm(init, axis=1, keepdims=True)
    g = ExprGraph()
    x = g.input("x", (signal_len, batch_size))
    kernels = g.parameter("kernels", init)
    beta = g.parameter("beta", np.full((n_kernels, 1), -2.0))
    W = g.toeplitz_from_kernels(kernels, signal_len, name="dictionary")
    expand = g.constant(np.kron(np.eye(n_kernels), np.ones((signal_len, 1))),
                        name="expand")
    ones = g.constant(np.ones((1, batch_size)), name="ones")
    thr = g.matmul(g.matmul(expand, g.softplus(beta)), ones, name="thr")
    s = g.constant(np.zeros((n_kernels * signal_len, batch_size)),
                   name="code_init")
    wt = g.transpose(W)
    for q in range(n_iters):
        lin = g.matmul(W, s)
        mu = g.exp(lin, clamp=EXP_CLAMP) if link == "exp" else lin
        pre = g.add(s, g.smul(g.matmul(wt, g.sub(x, mu)), step))
        s = g.soft_threshold(pre, thr,
                             name="code" if q == n_iters - 1 else None)
    lin = g.matmul(W, s)
    if link == "exp":
        mu = g.exp(lin, clamp=EXP_CLAMP, name="decoded")
        fitted = g.sub(g.sum(mu), g.sum(g.mul(x, lin)))
        g.smul(fitted, 1.0 / batch_size, name="loss")
    else:
        g.smul(g.mse(lin, x), 0.5, name="loss")
    return g


def params_from_dcea_graph(graph, step, n_iters, signal_len, link):
    values = graph.get_params()
    thresholds = softplus(values["beta"])[:, 0]
    return DceaParams(values["kernels"].copy(), thresholds, step, n_iters,
                      signal_len, link)


def dcea_train(X, n_kernels, kernel_len, n_iters=10, step=0.1,
               link="linear", config=None):
    """Fit kernels and thresholds by unfolding the encoder.

    Returns (DceaParams, per-epoch losses).  The trained parameters drive
    encode_batch directly, which reproduces the graph's "code" node exactly.
    """
    config = config or TrainConfig()
    X = np.asarray(X, dtype=np.float64)
    graph = build_dcea_graph(X.shape[1], n_kernels, kernel_len, n_iters,
                             step, config.batch_size, link, config.seed)
    rng = CounterRng(config.seed).spawn("shuffle")

    def bind_batch(idx):
        return {"x": X[idx].T}

    losses = fit(graph, bind_batch, X.shape[0], config, rng, loss_node="loss")
    return params_from_dcea_graph(graph, step, n_iters, X.shape[1], link), losses


def dense_autoencoder_param_count(signal_len, n_kernels, depth=5,
                                  width_factor=4):
    """Parameter count of the dense autoencoder matched in depth and code size."""
    widths = ([signal_len] + [width_factor * signal_len] * (depth - 1)
              + [n_kernels * signal_len])
    total = 0
    for d_in, d_out in zip(widths[:-1], widths[1:]):
        total += d_out * d_in + d_out
    return total
