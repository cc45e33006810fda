"""Exhaustive posterior marginals for short finite-memory sequences.

Enumerates every warm-up tuple and symbol sequence, scores each
configuration by prior times transition terms times emission densities,
and accumulates exact per-symbol marginals.  Exponential in J + T, so a
guard refuses anything past 2^20 configurations; this exists to check the
message-passing detector, not to be fast.
"""

from itertools import product

import numpy as np

from ..simulate.markov import shift_state, state_index

MAX_CONFIGS = 2 ** 20


def brute_force_map(xs, model, initial_state=None):
    """Exact per-symbol MAP for a MarkovSequenceModel.

    Returns (symbols, marginals) with marginals (T, A).  ``initial_state``
    fixes the warm-up tuple (values, oldest first); otherwise all warm-ups
    are averaged with uniform prior, matching the sampler.
    """
    xs = np.asarray(xs, dtype=np.float64)
    T = xs.shape[0]
    alphabet = np.array(model.alphabet)
    n_sym = alphabet.shape[0]
    J = model.memory
    warmups = ([tuple(state_index([v], model.alphabet) for v in initial_state)]
               if initial_state is not None
               else list(product(range(n_sym), repeat=J)))
    if len(warmups) * n_sym ** T > MAX_CONFIGS:
        raise ValueError(
            f"{len(warmups)} x {n_sym}^{T} configurations exceed the "
            f"enumeration guard ({MAX_CONFIGS})")
    marginals = np.zeros((T, n_sym))
    for warm in warmups:
        for seq in product(range(n_sym), repeat=T):
            full = warm + seq
            state = 0
            for d in warm:
                state = state * n_sym + d
            weight = 1.0
            for t in range(T):
                a = seq[t]
                weight *= model.transition[state, a]
                window = alphabet[np.array(full[t: t + J + 1])]
                weight *= float(model.emission.density(xs[t: t + 1],
                                                       window[None, :])[0, 0])
                state = shift_state(state, a, J, n_sym)
            for t in range(T):
                marginals[t, seq[t]] += weight
    totals = marginals.sum(axis=1, keepdims=True)
    if np.any(totals <= 0) or not np.all(np.isfinite(totals)):
        raise FloatingPointError("all configurations scored zero")
    marginals /= totals
    return alphabet[np.argmax(marginals, axis=1)], marginals
