"""Compressed sensing with a learned generative prior.

Instead of an L1 penalty, constrain the signal to the range of a small
generator G and search the latent space:

    minimize over z:  ||H G(z) - x||^2 + lam_z ||z||^2

The search is plain gradient descent with backtracking and random restarts;
gradients come from an expression graph built around the frozen generator.
For a purely linear generator the problem is ridge regression with the
closed form (B^T H^T H B + lam I)^{-1} B^T H^T x, which is the oracle the
iterative solver is tested against.
"""

from dataclasses import dataclass

import numpy as np

from ..autodiff import ExprGraph, TrainConfig, dense, fit, glorot, ones_row
from ..autodiff.functional import relu
from ..simulate import CounterRng


@dataclass
class GeneratorPrior:
    """Dense chain z -> signal; activation "relu" or "identity" per layer."""
    weights: list
    biases: list
    activations: list

    def __post_init__(self):
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ValueError("one weight, bias, and activation per layer")
        for act in self.activations:
            if act not in ("relu", "identity"):
                raise ValueError(f"unsupported activation: {act}")

    @property
    def latent_dim(self):
        return self.weights[0].shape[1]

    @property
    def signal_len(self):
        return self.weights[-1].shape[0]

    @property
    def is_linear(self):
        return all(a == "identity" for a in self.activations)


def generator_forward(prior, Z):
    """Decode latents; Z is (B, k) or (k,), result is (B, n) or (n,)."""
    Z = np.asarray(Z, dtype=np.float64)
    single = Z.ndim == 1
    cols = (Z[None, :] if single else Z).T
    for W, b, act in zip(prior.weights, prior.biases, prior.activations):
        cols = W @ cols + b
        if act == "relu":
            cols = relu(cols)
    return cols[:, 0] if single else cols.T


def pretrain_generator(S, latent_dim, hidden=None, config=None):
    """Autoencode signal samples, keep the decoder as the prior.

    S is (B, n).  Returns (GeneratorPrior, per-epoch losses).  The decoder
    is hidden-relu then linear; the encoder is discarded.
    """
    config = config or TrainConfig()
    S = np.asarray(S, dtype=np.float64)
    n = S.shape[1]
    if hidden is None:
        hidden = max(2 * latent_dim, n)
    rng = CounterRng(config.seed)
    g = ExprGraph()
    s = g.input("s", (n, config.batch_size))
    ones = ones_row(g, config.batch_size)
    we = g.parameter("enc_w", glorot(rng, latent_dim, n))
    be = g.parameter("enc_b", np.zeros((latent_dim, 1)))
    w1 = g.parameter("dec_w1", glorot(rng, hidden, latent_dim))
    b1 = g.parameter("dec_b1", np.zeros((hidden, 1)))
    w2 = g.parameter("dec_w2", glorot(rng, n, hidden))
    b2 = g.parameter("dec_b2", np.zeros((n, 1)))
    z = dense(g, s, we, be, ones)
    h = g.relu(dense(g, z, w1, b1, ones))
    recon = dense(g, h, w2, b2, ones)
    g.mse(recon, s, name="loss")
    shuffle = CounterRng(config.seed).spawn("shuffle")

    def bind_batch(idx):
        return {"s": S[idx].T}

    losses = fit(g, bind_batch, S.shape[0], config, shuffle, loss_node="loss")
    values = g.get_params()
    prior = GeneratorPrior(
        weights=[values["dec_w1"].copy(), values["dec_w2"].copy()],
        biases=[values["dec_b1"].copy(), values["dec_b2"].copy()],
        activations=["relu", "identity"])
    return prior, losses


def linear_generator_recover(x, matrix, prior, lam_z):
    """Ridge closed form for a generator with no nonlinearities."""
    if not prior.is_linear:
        raise ValueError("closed form needs a linear generator")
    B = prior.weights[0]
    c = prior.biases[0]
    for W, b in zip(prior.weights[1:], prior.biases[1:]):
        c = W @ c + b
        B = W @ B
    H = np.asarray(matrix, dtype=np.float64)
    HB = H @ B
    rhs = HB.T @ (np.asarray(x, dtype=np.float64) - (H @ c)[:, 0])
    gram = HB.T @ HB + lam_z * np.eye(prior.latent_dim)
    z = np.linalg.solve(gram, rhs)
    return generator_forward(prior, z), z


def _build_recovery_graph(x, matrix, prior, lam_z):
    g = ExprGraph()
    z = g.parameter("z", np.zeros((prior.latent_dim, 1)))
    cur = z
    for W, b, act in zip(prior.weights, prior.biases, prior.activations):
        cur = g.add(g.matmul(g.constant(W), cur), g.constant(b))
        if act == "relu":
            cur = g.relu(cur)
    pred = g.matmul(g.constant(np.asarray(matrix, dtype=np.float64)), cur,
                    name="prediction")
    resid = g.sub(pred, g.constant(np.asarray(x, dtype=np.float64)[:, None]))
    data = g.sum(g.square(resid))
    g.add(data, g.smul(g.sum(g.square(z)), lam_z), name="loss")
    return g


def csgm_recover(x, matrix, prior, lam_z=1e-3, iters=300, restarts=3,
                 seed=0, init_scale=1.0, step=1e-2):
    """Latent gradient search with backtracking and restarts.

    Returns (signal_estimate, best_latent, best_loss).  Each restart draws
    a fresh Gaussian start; within a restart the step grows 1.2x after an
    accepted move and halves on a rejected one.
    """
    g = _build_recovery_graph(x, matrix, prior, lam_z)
    rng = CounterRng(seed)
    best_loss = np.inf
    best_z = None
    for _ in range(max(1, restarts)):
        z = init_scale * rng.normal((prior.latent_dim, 1))
        g.set_param("z", z)
        loss = float(g.eval({}, root="loss"))
        t = step
        for _ in range(iters):
            grad = g.backward(root="loss")["z"]
            accepted = False
            for _ in range(30):
                g.set_param("z", z - t * grad)
                trial = float(g.eval({}, root="loss"))
                if trial <= loss:
                    z = z - t * grad
                    loss = trial
                    t *= 1.2
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                g.set_param("z", z)
                g.eval({}, root="loss")
                break
        if loss < best_loss:
            best_loss = loss
            best_z = z.copy()
    g.set_param("z", best_z)
    g.eval({}, root="loss")
    signal = generator_forward(prior, best_z[:, 0])
    return signal, best_z[:, 0], best_loss
