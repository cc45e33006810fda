"""Counter-based random number generation.

Every sampler in the toolkit draws from :class:`CounterRng`, a SplitMix64
counter generator chosen over library bit generators so the exact stream
is pinned down by this file alone and reproduces bit-for-bit on any
platform (and is easy to re-implement in another language):

    output[i] = mix(key + (counter + i + 1) * GOLDEN)   mod 2**64

where ``key = mix(mix(seed))``, GOLDEN = 0x9E3779B97F4A7C15, and ``mix``
is the SplitMix64 finalizer

    z ^= z >> 30;  z *= 0xBF58476D1CE4E9B5
    z ^= z >> 27;  z *= 0x94D049BB133111EB
    z ^= z >> 31

Derived quantities:

* uniforms take the top 53 bits: u = (x >> 11) * 2**-53, in [0, 1)
* normals use the Box-Muller transform on uniform pairs, with the radial
  uniform shifted into (0, 1] to avoid log(0)
* bounded integers are floor(u * n)
* Poisson uses Knuth's product-of-uniforms method (rates here are small)

How many raw outputs a vectorized call consumes is deterministic given
the arguments, so identical call sequences yield identical results.
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E9B5)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


def _mix(z):
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def derive_seed(seed, *tokens):
    """Fold integer/string tokens into ``seed`` to name a substream.

    h starts at mix(seed); each token is hashed byte-wise (UTF-8 for
    strings, 8-byte little-endian for integers) via h = mix(h + byte + GOLDEN).
    """
    h = _mix(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF))
    with np.errstate(over="ignore"):
        for token in tokens:
            if isinstance(token, str):
                data = token.encode("utf-8")
            else:
                data = int(token).to_bytes(8, "little", signed=False)
            for byte in data:
                h = _mix(h + np.uint64(byte) + _GOLDEN)
    return int(h)


class CounterRng:
    """Stateful facade over the counter stream defined above."""

    def __init__(self, seed):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.key = _mix(_mix(np.uint64(self.seed)))
        self.counter = 0

    def spawn(self, *tokens):
        """Independent generator for a named substream of this seed."""
        return CounterRng(derive_seed(self.seed, *tokens))

    def u64(self, n):
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            return _mix(self.key + idx * _GOLDEN)

    def uniform(self, shape=()):
        """Uniforms in [0, 1) with 53-bit resolution."""
        if isinstance(shape, (int, np.integer)):
            shape = (int(shape),)
        n = int(np.prod(shape)) if shape else 1
        u = (self.u64(n) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
        return u.reshape(shape) if shape else float(u[0])

    def normal(self, shape=()):
        """Standard normals via Box-Muller."""
        if isinstance(shape, (int, np.integer)):
            shape = (int(shape),)
        n = int(np.prod(shape)) if shape else 1
        pairs = (n + 1) // 2
        u1 = (self.u64(pairs) >> np.uint64(11)).astype(np.float64)
        u1 = (u1 + 1.0) * 2.0 ** -53  # (0, 1]
        u2 = (self.u64(pairs) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return z.reshape(shape) if shape else float(z[0])

    def integers(self, n_values, shape=()):
        """Integers uniform on {0, ..., n_values - 1}."""
        if n_values < 1:
            raise ValueError("n_values must be >= 1")
        shp = shape if shape else (1,)
        u = self.uniform(shp)
        out = np.minimum((u * n_values).astype(np.int64), n_values - 1)
        return out.reshape(shape) if shape else int(out[0])

    def permutation(self, n):
        """Deterministic shuffle of arange(n) by sorting uniforms."""
        return np.argsort(self.uniform((n,)), kind="stable")

    def poisson(self, rates):
        """Poisson draws, one per entry of ``rates`` (all >= 0).

        Knuth's method: count uniform factors until the running product
        drops below exp(-rate).  Each round draws one uniform per entry
        (including finished ones) so consumption depends only on the
        slowest entry, keeping the stream layout deterministic.
        """
        rates = np.asarray(rates, dtype=np.float64)
        if np.any(rates < 0):
            raise ValueError("poisson rates must be nonnegative")
        if np.any(rates > 500):
            raise ValueError("poisson rate too large for the product method")
        flat = rates.reshape(-1)
        limit = np.exp(-flat)
        prod = np.ones_like(flat)
        counts = np.zeros(flat.shape, dtype=np.int64)
        active = prod >= limit
        # rate 0 must yield exactly 0: exp(-0) = 1 and the first uniform
        # is < 1 almost surely, but guard the boundary explicitly
        while True:
            prod *= self.uniform(flat.shape)
            still = prod >= limit
            counts += active & still
            active = still
            if not active.any():
                break
        counts[flat == 0.0] = 0
        return counts.reshape(rates.shape)
