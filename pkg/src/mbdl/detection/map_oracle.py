"""Exhaustive maximum-a-posteriori detection for memoryless MIMO channels.

With equiprobable symbols and Gaussian noise the MAP rule is the
minimum-distance rule over the full symbol-vector lattice, so the cost is
|S|^K distance evaluations per sample.  This is the ground-truth oracle
against which faster detectors are judged; a hard guard refuses lattices
past 2^20 points.
"""

from itertools import product

import numpy as np

MAX_LATTICE = 2 ** 20


def enumerate_symbol_vectors(constellation, n_users):
    """All symbol vectors, lexicographic in the ascending constellation.

    Lexicographic order makes argmin tie-breaks deterministic: the first
    minimizer is the lexicographically smallest one.
    """
    if len(constellation) ** n_users > MAX_LATTICE:
        raise ValueError(
            f"{len(constellation)}^{n_users} symbol vectors exceed the "
            f"exhaustive-search guard ({MAX_LATTICE})")
    return np.array(list(product(constellation, repeat=n_users)))


def map_exhaustive(x, model, chunk=4096):
    """Minimum-distance decisions; x is (N,) or (B, N), returns matching s.

    Ties pick the lexicographically smallest symbol vector.
    """
    H = model.matrix
    cand = enumerate_symbol_vectors(model.constellation, model.n_users)
    proj = cand @ H.T                      # (C, N)
    proj_sq = np.sum(proj * proj, axis=1)  # ||H s_c||^2
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != model.n_out:
        raise ValueError(f"observations have {X.shape[1]} entries, "
                         f"channel outputs {model.n_out}")
    out = np.empty((X.shape[0], model.n_users))
    for lo in range(0, X.shape[0], chunk):
        block = X[lo: lo + chunk]
        # ||x - Hs||^2 = ||x||^2 - 2 x.Hs + ||Hs||^2; drop the ||x||^2 term
        scores = proj_sq[None, :] - 2.0 * block @ proj.T
        out[lo: lo + chunk] = cand[np.argmin(scores, axis=1)]
    return out[0] if single else out
