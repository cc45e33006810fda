"""Per-symbol MAP detection by forward-backward message passing.

The hidden chain is the J-symbol state u_t; one step multiplies a
transition factor P(a | u_{t-1}) by a window score from a function node
and marginalizes.  With f the forward and b the backward messages,

    f[t](v) = sum_d f[t-1](prev) T(prev, a) D_t(prev, a),  v = shift(prev, a)
    b[t](u) = sum_a T(u, a) D_{t+1}(u, a) b[t+1](shift(u, a))

where D_t is the (state, symbol)-shaped window score at step t.  The
forward sum collapses the oldest digit of prev, which after reshaping the
(state, symbol) product table to (A, A^{J-1}, A) is just a sum over the
leading axis.  Messages are renormalized every step; the per-symbol
decision maximizes the posterior marginal f[t] * b[t] summed over states
that end in the symbol.
"""

from dataclasses import dataclass

import numpy as np

from ..simulate.markov import state_index
from .nodes import AnalyticFunctionNode


@dataclass
class MessageTable:
    """Normalized messages and per-symbol posteriors of one run."""
    forward: np.ndarray    # (T+1, n_states)
    backward: np.ndarray   # (T+1, n_states)
    marginals: np.ndarray  # (T, A)


def _normalize(vec, what, step):
    total = vec.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise FloatingPointError(
            f"{what} message vanished at step {step}")
    return vec / total


def sp_map_detect(xs, node, transition, initial_state=None):
    """Detect symbols from (T,) observations.

    ``node`` provides window scores, ``transition`` is the (A^J, A) table
    of P(next symbol | state).  ``initial_state`` is the warm-up symbol
    tuple (values, oldest first) if known; otherwise the prior over the
    initial state is uniform.  Returns (symbols, MessageTable).
    """
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 1:
        raise ValueError("observations must be 1-D")
    T = xs.shape[0]
    alphabet = np.array(node.alphabet)
    n_sym = alphabet.shape[0]
    memory = node.memory
    n_states = n_sym ** memory
    transition = np.asarray(transition, dtype=np.float64)
    if transition.shape != (n_states, n_sym):
        raise ValueError(f"transition must be ({n_states}, {n_sym})")
    dens = np.asarray(node.densities(xs), dtype=np.float64)
    if dens.shape != (T, n_states * n_sym):
        raise ValueError(f"node densities must be (T, {n_states * n_sym})")
    if np.any(dens < 0) or not np.all(np.isfinite(dens)):
        raise ValueError("window scores must be finite and nonnegative")
    dens = dens.reshape(T, n_states, n_sym)

    fwd = np.empty((T + 1, n_states))
    if initial_state is None:
        fwd[0] = 1.0 / n_states
    else:
        if len(initial_state) != memory:
            raise ValueError(f"initial state needs {memory} symbols")
        fwd[0] = 0.0
        fwd[0, state_index(initial_state, node.alphabet)] = 1.0
    for t in range(1, T + 1):
        table = fwd[t - 1][:, None] * transition * dens[t - 1]
        nxt = table.reshape(n_sym, n_states // n_sym, n_sym).sum(axis=0)
        fwd[t] = _normalize(nxt.ravel(), "forward", t)

    shift = (np.arange(n_states)[:, None] % (n_states // n_sym)) * n_sym \
        + np.arange(n_sym)[None, :]
    bwd = np.empty((T + 1, n_states))
    bwd[T] = 1.0 / n_states
    for t in range(T - 1, -1, -1):
        gathered = bwd[t + 1][shift]
        bwd[t] = _normalize((transition * dens[t] * gathered).sum(axis=1),
                            "backward", t)

    marginals = np.empty((T, n_sym))
    for t in range(1, T + 1):
        post = _normalize(fwd[t] * bwd[t], "posterior", t)
        marginals[t - 1] = post.reshape(n_states // n_sym, n_sym).sum(axis=0)
    symbols = alphabet[np.argmax(marginals, axis=1)]
    return symbols, MessageTable(fwd, bwd, marginals)


def model_map_detect(xs, model, initial_state=None):
    """Convenience wrapper: exact node and transition from a sequence model."""
    node = AnalyticFunctionNode(model.emission, model.alphabet, model.memory)
    return sp_map_detect(xs, node, model.transition,
                         initial_state=initial_state)
