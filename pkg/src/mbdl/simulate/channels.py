"""Memoryless multi-user channel models and dataset samplers.

Conventions used throughout the toolkit:

* Constellations are stored sorted ascending; ties in any argmax over
  symbols resolve toward the lowest index, i.e. the smallest symbol.
* SNR(dB) = 10 log10(1 / sigma_w^2) for unit-power symbols, so
  sigma_w = 10**(-snr_db / 20).
* The Poisson channel emits counts with rate 1 + sqrt(rho) * (H @ m(s)),
  where m maps the BPSK symbols {-1, +1} to intensity bits {0, 1}; the
  offset keeps every rate >= 1.  When sweeping "SNR" for this channel we
  set rho = 10**(snr_db / 10).

Samplers are pure functions of (model, n, seed).
"""

from dataclasses import dataclass, field

import numpy as np

from .rng import CounterRng

BPSK = (-1.0, 1.0)


def snr_db_to_noise_std(snr_db):
    return 10.0 ** (-float(snr_db) / 20.0)


def snr_db_to_rate_gain(snr_db):
    return 10.0 ** (float(snr_db) / 10.0)


def _check_constellation(constellation):
    con = tuple(float(c) for c in constellation)
    if len(con) < 2:
        raise ValueError("constellation needs at least two symbols")
    if any(b <= a for a, b in zip(con, con[1:])):
        raise ValueError("constellation must be strictly increasing")
    return con


@dataclass(frozen=True)
class GaussianMimoChannel:
    """x = H s + w with w ~ N(0, sigma_w^2 I); s has i.i.d. uniform symbols."""

    matrix: np.ndarray
    noise_std: float
    constellation: tuple = BPSK

    def __post_init__(self):
        H = np.ascontiguousarray(self.matrix, dtype=np.float64)
        if H.ndim != 2:
            raise ValueError("channel matrix must be 2-D (n_out, n_users)")
        if not np.all(np.isfinite(H)):
            raise ValueError("channel matrix must be finite")
        if not self.noise_std > 0:
            raise ValueError("noise_std must be positive")
        object.__setattr__(self, "matrix", H)
        object.__setattr__(self, "constellation",
                           _check_constellation(self.constellation))

    @property
    def n_out(self):
        return self.matrix.shape[0]

    @property
    def n_users(self):
        return self.matrix.shape[1]


def sample_gaussian_channel(model, n, seed):
    """Draw n labeled pairs; returns (S (n, K) symbols, X (n, N))."""
    rng = CounterRng(seed)
    con = np.array(model.constellation)
    idx = rng.integers(len(con), (n, model.n_users))
    S = con[idx]
    noise = rng.normal((n, model.n_out)) * model.noise_std
    X = S @ model.matrix.T + noise
    return S, X


def perturb_channel(model, magnitude, seed):
    """Multiplicative channel-state error: entries scaled by (1 + magnitude*u),
    u uniform on [-1, 1).  Models training under CSI uncertainty."""
    if magnitude < 0:
        raise ValueError("magnitude must be nonnegative")
    rng = CounterRng(seed)
    u = rng.uniform(model.matrix.shape) * 2.0 - 1.0
    return GaussianMimoChannel(model.matrix * (1.0 + magnitude * u),
                               model.noise_std, model.constellation)


@dataclass(frozen=True)
class PoissonChannel:
    """Counts x_i ~ Poisson(1 + sqrt(rho) * [H m(s)]_i), entries independent.

    ``symbol_map`` lists the intensity m(c) >= 0 for each constellation
    symbol, in constellation order; the default maps BPSK to (0, 1).
    Requires H >= 0 so rates stay >= 1.
    """

    matrix: np.ndarray
    rate_gain: float
    constellation: tuple = BPSK
    symbol_map: tuple = (0.0, 1.0)

    def __post_init__(self):
        H = np.ascontiguousarray(self.matrix, dtype=np.float64)
        if H.ndim != 2 or not np.all(np.isfinite(H)):
            raise ValueError("channel matrix must be finite and 2-D")
        if np.any(H < 0):
            raise ValueError("Poisson channel matrix must be nonnegative")
        if not self.rate_gain >= 0:
            raise ValueError("rate_gain must be nonnegative")
        object.__setattr__(self, "matrix", H)
        object.__setattr__(self, "constellation",
                           _check_constellation(self.constellation))
        smap = tuple(float(v) for v in self.symbol_map)
        if len(smap) != len(self.constellation):
            raise ValueError("symbol_map must match the constellation")
        if any(v < 0 for v in smap):
            raise ValueError("symbol intensities must be nonnegative")
        object.__setattr__(self, "symbol_map", smap)

    @property
    def n_out(self):
        return self.matrix.shape[0]

    @property
    def n_users(self):
        return self.matrix.shape[1]

    def intensities(self, S):
        """Map symbol rows (n, K) to their intensity vectors m(s)."""
        con = np.array(self.constellation)
        smap = np.array(self.symbol_map)
        idx = np.searchsorted(con, np.asarray(S, dtype=np.float64))
        return smap[idx]

    def rates(self, S):
        """Per-entry Poisson rates for symbol rows (n, K) -> (n, N)."""
        return 1.0 + np.sqrt(self.rate_gain) * self.intensities(S) @ self.matrix.T


def sample_poisson_channel(model, n, seed):
    """Draw n labeled pairs; returns (S (n, K) symbols, X (n, N) counts)."""
    rng = CounterRng(seed)
    con = np.array(model.constellation)
    idx = rng.integers(len(con), (n, model.n_users))
    S = con[idx]
    X = rng.poisson(model.rates(S)).astype(np.float64)
    return S, X
