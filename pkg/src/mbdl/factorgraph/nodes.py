"""Function nodes: per-step factors over symbol windows.

A function node supplies, for every time step, a nonnegative score for each
length-(J+1) symbol window (the J-symbol state followed by the new symbol).
Windows are indexed like states: oldest symbol is the most significant
digit.  Scores only need to be correct up to a per-step constant because
the message recursions normalize; that freedom is what lets a learned
posterior ratio stand in for an exact density.
"""

from dataclasses import dataclass, field

import numpy as np

from ..simulate.markov import all_states


def window_values(alphabet, memory):
    """(A^(J+1), J+1) array of window symbol values in index order."""
    return np.array(all_states(memory + 1, alphabet))


@dataclass
class AnalyticFunctionNode:
    """Exact emission density evaluated on every window."""
    emission: object
    alphabet: tuple
    memory: int
    _windows: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.alphabet = tuple(float(c) for c in self.alphabet)
        self._windows = window_values(self.alphabet, self.memory)

    @property
    def n_windows(self):
        return self._windows.shape[0]

    def densities(self, xs):
        """(T,) observations -> (T, A^(J+1)) window scores."""
        return self.emission.density(np.asarray(xs, dtype=np.float64),
                                     self._windows)


@dataclass
class LearnedFunctionNode:
    """Posterior-ratio factor: score(x, w) = posterior(w | x) / prior(w).

    ``posterior`` maps (T,) observations to (T, A^(J+1)) window
    probabilities; ``prior`` is the window marginal the posterior was
    trained against.  By Bayes the ratio is proportional to the window
    likelihood, which is all the recursions need.
    """
    posterior: object
    prior: np.ndarray
    alphabet: tuple
    memory: int

    def __post_init__(self):
        self.alphabet = tuple(float(c) for c in self.alphabet)
        self.prior = np.asarray(self.prior, dtype=np.float64)
        expected = len(self.alphabet) ** (self.memory + 1)
        if self.prior.shape != (expected,):
            raise ValueError(f"prior must have {expected} entries")
        if np.any(self.prior <= 0):
            raise ValueError("prior must be strictly positive")

    @property
    def n_windows(self):
        return self.prior.shape[0]

    def densities(self, xs):
        post = np.asarray(self.posterior(np.asarray(xs, dtype=np.float64)),
                          dtype=np.float64)
        if post.ndim != 2 or post.shape[1] != self.n_windows:
            raise ValueError(
                f"posterior returned shape {post.shape}, expected "
                f"(T, {self.n_windows})")
        return post / self.prior
