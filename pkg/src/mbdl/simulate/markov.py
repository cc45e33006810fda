"""Finite-memory Markov symbol sequences with scalar emissions.

The model: symbols s_i from a finite alphabet follow
P(s_i | s_{i-J}, ..., s_{i-1}) given by a row-stochastic table, and each
observation x_i depends on the window (s_{i-J}, ..., s_i) through an
emission law.  J is the memory length.

State indexing convention (shared with the factor-graph module): a
J-tuple of symbols (oldest first) maps to an integer base-|S| with the
oldest symbol as the most significant digit.  The (J+1)-symbol window
index is then prev_state * |S| + newest_symbol_index.
"""

from dataclasses import dataclass
from itertools import product

import numpy as np

from .rng import CounterRng


def state_index(symbols, alphabet):
    """Tuple of symbols (oldest first) -> integer index."""
    lookup = {float(c): i for i, c in enumerate(alphabet)}
    idx = 0
    for s in symbols:
        idx = idx * len(alphabet) + lookup[float(s)]
    return idx


def index_state(idx, memory, alphabet):
    """Integer index -> tuple of symbols (oldest first)."""
    base = len(alphabet)
    digits = []
    for _ in range(memory):
        digits.append(idx % base)
        idx //= base
    return tuple(alphabet[d] for d in reversed(digits))


def all_states(memory, alphabet):
    """All J-tuples in index order (lexicographic, oldest symbol first)."""
    return [tuple(t) for t in product(alphabet, repeat=memory)]


def shift_state(idx, new_symbol_idx, memory, n_symbols):
    """Drop the oldest symbol, append a new one; works on index arrays."""
    return (idx % n_symbols ** (memory - 1)) * n_symbols + new_symbol_idx


def uniform_transition(memory, alphabet):
    n = len(alphabet)
    return np.full((n ** memory, n), 1.0 / n)


@dataclass(frozen=True)
class GaussianIsiEmission:
    """x_i = sum_j taps[j] * s_{i-j} + noise_std * w_i, w_i ~ N(0, 1).

    taps[0] weights the current symbol; the window passed to the methods
    is oldest-first, so the taps are applied reversed.
    """

    taps: np.ndarray
    noise_std: float

    def __post_init__(self):
        taps = np.ascontiguousarray(self.taps, dtype=np.float64)
        if taps.ndim != 1 or not np.all(np.isfinite(taps)):
            raise ValueError("taps must be a finite 1-D array")
        if not self.noise_std > 0:
            raise ValueError("noise_std must be positive")
        object.__setattr__(self, "taps", taps)

    @property
    def memory(self):
        return self.taps.shape[0] - 1

    def mean(self, windows):
        """Windows (..., J+1) oldest-first -> conditional means."""
        return np.asarray(windows, dtype=np.float64) @ self.taps[::-1]

    def sample(self, windows, rng):
        mu = self.mean(windows)
        return mu + self.noise_std * rng.normal(mu.shape)

    def density(self, x, windows):
        """N(x; mean(window), noise_std^2), vectorized over windows."""
        mu = self.mean(windows)
        z = (np.asarray(x, dtype=np.float64)[..., None] - mu) / self.noise_std
        return np.exp(-0.5 * z * z) / (np.sqrt(2.0 * np.pi) * self.noise_std)


@dataclass(frozen=True)
class PoissonIsiEmission:
    """x_i ~ Poisson(1 + sqrt(rate_gain) * sum_j taps[j] * m(s_{i-j})).

    ``intensity`` maps each alphabet symbol to m(c) >= 0; taps must be
    nonnegative so rates stay >= 1.  taps[0] weights the current symbol.
    """

    taps: np.ndarray
    rate_gain: float
    alphabet: tuple
    intensity: tuple

    def __post_init__(self):
        taps = np.ascontiguousarray(self.taps, dtype=np.float64)
        if taps.ndim != 1 or np.any(taps < 0) or not np.all(np.isfinite(taps)):
            raise ValueError("taps must be finite, 1-D and nonnegative")
        if not self.rate_gain >= 0:
            raise ValueError("rate_gain must be nonnegative")
        if len(self.alphabet) != len(self.intensity):
            raise ValueError("one intensity per alphabet symbol required")
        if any(v < 0 for v in self.intensity):
            raise ValueError("intensities must be nonnegative")
        object.__setattr__(self, "taps", taps)
        object.__setattr__(self, "alphabet",
                           tuple(float(c) for c in self.alphabet))
        object.__setattr__(self, "intensity",
                           tuple(float(v) for v in self.intensity))

    @property
    def memory(self):
        return self.taps.shape[0] - 1

    def rate(self, windows):
        con = np.array(self.alphabet)
        lvl = np.array(self.intensity)
        idx = np.searchsorted(con, np.asarray(windows, dtype=np.float64))
        return 1.0 + np.sqrt(self.rate_gain) * (lvl[idx] @ self.taps[::-1])

    def sample(self, windows, rng):
        return rng.poisson(self.rate(windows)).astype(np.float64)

    def density(self, x, windows):
        """Poisson pmf at the (integer) observations, vectorized."""
        lam = self.rate(windows)
        k = np.asarray(x, dtype=np.float64)
        if np.any(k < 0) or np.any(k != np.round(k)):
            raise ValueError("Poisson observations must be nonnegative integers")
        kmax = int(k.max()) if k.size else 0
        log_fact = np.concatenate(
            [[0.0], np.cumsum(np.log(np.arange(1, kmax + 1)))])
        lg = log_fact[k.astype(np.int64)][..., None]
        kk = k[..., None]
        return np.exp(kk * np.log(lam) - lam - lg)


@dataclass(frozen=True)
class MarkovSequenceModel:
    """Finite-memory symbol source plus an emission law."""

    memory: int
    alphabet: tuple
    transition: np.ndarray
    emission: object

    def __post_init__(self):
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        alphabet = tuple(float(c) for c in self.alphabet)
        if any(b <= a for a, b in zip(alphabet, alphabet[1:])):
            raise ValueError("alphabet must be strictly increasing")
        object.__setattr__(self, "alphabet", alphabet)
        T = np.ascontiguousarray(self.transition, dtype=np.float64)
        n = len(alphabet)
        if T.shape != (n ** self.memory, n):
            raise ValueError(
                f"transition table must be ({n ** self.memory}, {n}), "
                f"got {T.shape}")
        if np.any(T < 0) or np.any(np.abs(T.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("transition rows must be probability vectors")
        object.__setattr__(self, "transition", T)
        if getattr(self.emission, "memory", self.memory) != self.memory:
            raise ValueError("emission taps length must be memory + 1")

    @property
    def n_states(self):
        return len(self.alphabet) ** self.memory


class MarkovSample(tuple):
    """(symbols, observations, initial) with attribute access."""

    __slots__ = ()

    def __new__(cls, symbols, observations, initial):
        return super().__new__(cls, (symbols, observations, initial))

    symbols = property(lambda self: self[0])
    observations = property(lambda self: self[1])
    initial = property(lambda self: self[2])


def sample_markov_sequence(model, T, seed):
    """Sample (s_1..s_T, x_1..x_T) plus the J uniform warm-up symbols.

    The warm-up symbols sit at positions 1-J..0; emissions for i <= J use
    them to fill the window, so x_1..x_T are all well defined.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    rng = CounterRng(seed)
    con = np.array(model.alphabet)
    n_sym = len(con)
    J = model.memory
    initial_idx = rng.integers(n_sym, (J,))
    window = list(initial_idx)  # symbol indices, oldest first
    state = 0
    for d in window:
        state = state * n_sym + int(d)
    cdf = np.cumsum(model.transition, axis=1)
    u = rng.uniform((T,))
    sym_idx = np.empty(T, dtype=np.int64)
    for i in range(T):
        a = int(np.searchsorted(cdf[state], u[i], side="right"))
        a = min(a, n_sym - 1)
        sym_idx[i] = a
        state = shift_state(state, a, J, n_sym)
    full = np.concatenate([initial_idx, sym_idx])
    windows = np.stack([full[i: i + J + 1] for i in range(T)])
    x = model.emission.sample(con[windows], rng)
    return MarkovSample(con[sym_idx], x, tuple(con[initial_idx]))
