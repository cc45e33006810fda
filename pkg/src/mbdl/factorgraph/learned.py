"""Learning the factors of the message-passing detector from samples.

The chain structure (memory J, alphabet) is assumed known; what is learned
is everything model-specific: the transition table as an add-one smoothed
histogram, the window prior the same way, and the window posterior
P(window | x) as a small softmax classifier on the scalar observation.
Dividing classifier outputs by the prior gives likelihood-ratio scores,
which plug into the same recursions as exact densities.
"""

from dataclasses import dataclass

import numpy as np

from ..autodiff import (ExprGraph, TrainConfig, as_one_hot, dense, fit,
                        glorot, load_checkpoint, ones_row, relu,
                        save_checkpoint, softmax)
from ..simulate import CounterRng
from ..simulate.markov import shift_state, state_index
from .nodes import LearnedFunctionNode
from .sum_product import sp_map_detect


def _sequence_windows(symbols, initials, alphabet, memory):
    """Window index at every step of every sequence; returns (B, T) ints."""
    symbols = np.atleast_2d(np.asarray(symbols, dtype=np.float64))
    initials = np.atleast_2d(np.asarray(initials, dtype=np.float64))
    if initials.shape != (symbols.shape[0], memory):
        raise ValueError("one length-J warm-up tuple per sequence required")
    n_sym = len(alphabet)
    out = np.empty(symbols.shape, dtype=np.int64)
    for b in range(symbols.shape[0]):
        full = np.concatenate([initials[b], symbols[b]])
        idx = state_index(full[: memory + 1], alphabet)
        out[b, 0] = idx
        for t in range(1, symbols.shape[1]):
            idx = shift_state(idx, state_index([full[memory + t]], alphabet),
                              memory + 1, n_sym)
            out[b, t] = idx
    return out


def learn_transition_histogram(symbols, initials, alphabet, memory):
    """Add-one smoothed estimate of P(symbol | state); returns (A^J, A)."""
    symbols = np.atleast_2d(np.asarray(symbols, dtype=np.float64))
    initials = np.atleast_2d(np.asarray(initials, dtype=np.float64))
    n_sym = len(alphabet)
    counts = np.ones((n_sym ** memory, n_sym))
    for b in range(symbols.shape[0]):
        state = state_index(initials[b], alphabet)
        for t in range(symbols.shape[1]):
            a = state_index([symbols[b, t]], alphabet)
            counts[state, a] += 1.0
            state = shift_state(state, a, memory, n_sym)
    return counts / counts.sum(axis=1, keepdims=True)


def learn_window_prior(symbols, initials, alphabet, memory):
    """Add-one smoothed marginal of the (J+1)-symbol window."""
    windows = _sequence_windows(symbols, initials, alphabet, memory)
    n_windows = len(alphabet) ** (memory + 1)
    counts = np.ones(n_windows)
    np.add.at(counts, windows.ravel(), 1.0)
    return counts / counts.sum()


@dataclass
class WindowPosterior:
    """Softmax classifier x -> P(window | x) on the standardized scalar."""
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    x_mean: float
    x_scale: float

    def __call__(self, xs):
        xs = np.asarray(xs, dtype=np.float64)
        feats = ((xs - self.x_mean) / self.x_scale)[None, :]
        hidden = relu(self.w1 @ feats + self.b1)
        return softmax(self.w2 @ hidden + self.b2).T


def train_window_posterior(observations, window_idx, n_windows, hidden=32,
                           config=None):
    """Fit the classifier on flattened (observation, window index) pairs."""
    config = config or TrainConfig()
    obs = np.asarray(observations, dtype=np.float64).ravel()
    labels = np.asarray(window_idx, dtype=np.int64).ravel()
    mean = float(obs.mean())
    scale = float(max(obs.std(), 1e-9))
    feats = ((obs - mean) / scale)[:, None]
    rng = CounterRng(config.seed)
    g = ExprGraph()
    x = g.input("x", (1, config.batch_size))
    y = g.input("y", (n_windows, config.batch_size))
    ones = ones_row(g, config.batch_size)
    w1 = g.parameter("w1", glorot(rng, hidden, 1))
    b1 = g.parameter("b1", np.zeros((hidden, 1)))
    w2 = g.parameter("w2", glorot(rng, n_windows, hidden))
    b2 = g.parameter("b2", np.zeros((n_windows, 1)))
    h = g.relu(dense(g, x, w1, b1, ones))
    probs = g.softmax(dense(g, h, w2, b2, ones))
    g.cross_entropy(probs, y, name="loss")
    shuffle = CounterRng(config.seed).spawn("shuffle")

    def bind_batch(idx):
        return {"x": feats[idx].T, "y": as_one_hot(labels[idx], n_windows)}

    losses = fit(g, bind_batch, feats.shape[0], config, shuffle,
                 loss_node="loss")
    v = g.get_params()
    return WindowPosterior(v["w1"].copy(), v["b1"].copy(), v["w2"].copy(),
                           v["b2"].copy(), mean, scale), losses


@dataclass
class LearnedFgModel:
    """Everything needed to run detection learned from labelled sequences."""
    posterior: WindowPosterior
    prior: np.ndarray
    transition: np.ndarray
    alphabet: tuple
    memory: int

    def node(self):
        return LearnedFunctionNode(self.posterior, self.prior,
                                   self.alphabet, self.memory)

    def save(self, path):
        p = self.posterior
        save_checkpoint(path, {
            "w1": p.w1, "b1": p.b1, "w2": p.w2, "b2": p.b2,
            "x_stats": np.array([p.x_mean, p.x_scale]),
            "prior": self.prior, "transition": self.transition,
            "alphabet": np.array(self.alphabet),
            "memory": np.array(float(self.memory))})

    @classmethod
    def load(cls, path):
        v = load_checkpoint(path)
        posterior = WindowPosterior(v["w1"], v["b1"], v["w2"], v["b2"],
                                    float(v["x_stats"][0]),
                                    float(v["x_stats"][1]))
        return cls(posterior, v["prior"], v["transition"],
                   tuple(float(c) for c in v["alphabet"]),
                   int(v["memory"]))


def learned_fg_train(observations, symbols, initials, alphabet, memory,
                     hidden=32, config=None):
    """Estimate transition, prior, and posterior; returns (model, losses)."""
    transition = learn_transition_histogram(symbols, initials, alphabet,
                                            memory)
    prior = learn_window_prior(symbols, initials, alphabet, memory)
    windows = _sequence_windows(symbols, initials, alphabet, memory)
    posterior, losses = train_window_posterior(
        observations, windows, len(alphabet) ** (memory + 1), hidden, config)
    return LearnedFgModel(posterior, prior, transition,
                          tuple(float(c) for c in alphabet), memory), losses


def learned_fg_detect(xs, model, initial_state=None):
    """Message-passing detection with learned factors."""
    return sp_map_detect(xs, model.node(), model.transition,
                         initial_state=initial_state)
