"""Iterative soft interference cancellation for Gaussian MIMO channels.

Every user keeps a symbol PMF.  One round recomputes each user's PMF after
subtracting the other users' PMF means from the observation and folding
their PMF variances into an effective Gaussian noise covariance:

    z_k     = x - sum_{l != k} e_l h_l
    Sigma_k = sigma_w^2 I + sum_{l != k} v_l h_l h_l^T
    p_k(a) propto exp(-0.5 (z_k - a h_k)^T Sigma_k^{-1} (z_k - a h_k))

All users update in parallel from the previous round's PMFs.  The same
per-user soft decode is reused verbatim by the pluggable detector in
deepsic.py, so the two agree to floating-point noise by construction.
"""

import numpy as np

from ..linalg import cho_solve, spd_cholesky


def uniform_pmfs(n_samples, n_users, n_symbols):
    return np.full((n_samples, n_users, n_symbols), 1.0 / n_symbols)


def pmf_moments(pmfs, constellation):
    """Mean e and variance v of each symbol PMF; both (B, K)."""
    points = np.asarray(constellation, dtype=np.float64)
    e = pmfs @ points
    v = pmfs @ (points * points) - e * e
    return e, np.maximum(v, 0.0)


def soft_decode_user(x, pmfs, model, user):
    """PMF for one user after cancelling the others; returns (B, |S|).

    x is (B, N) raw observations, pmfs is (B, K, |S|) from the previous
    round.  The user's own PMF never enters: only the complement's means
    and variances do.
    """
    H = model.matrix
    points = np.asarray(model.constellation, dtype=np.float64)
    e, v = pmf_moments(pmfs, model.constellation)
    others = [l for l in range(model.n_users) if l != user]
    z = x - e[:, others] @ H[:, others].T
    cols = H[:, others].T
    outer = cols[:, :, None] * cols[:, None, :]
    cov = np.einsum("bk,kij->bij", v[:, others], outer)
    cov += (model.noise_std ** 2) * np.eye(model.n_out)
    chol = spd_cholesky(cov)
    h = H[:, user]
    rhs = np.stack([z, np.broadcast_to(h, z.shape)], axis=-1)
    sol = cho_solve(chol, rhs)
    quad_z = np.sum(z * sol[..., 0], axis=-1)
    cross = np.sum(z * sol[..., 1], axis=-1)
    quad_h = np.sum(h * sol[..., 1], axis=-1)
    expo = -0.5 * (quad_z[:, None]
                   - 2.0 * points[None, :] * cross[:, None]
                   + (points * points)[None, :] * quad_h[:, None])
    expo -= expo.max(axis=1, keepdims=True)
    p = np.exp(expo)
    return p / p.sum(axis=1, keepdims=True)


def sic_soft_decode(x, model, iters=5, initial_pmfs=None):
    """Run iterative cancellation rounds; returns final PMFs (B, K, |S|)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != model.n_out:
        raise ValueError(f"observations have {X.shape[1]} entries, "
                         f"channel outputs {model.n_out}")
    n_sym = len(model.constellation)
    if initial_pmfs is None:
        pmfs = uniform_pmfs(X.shape[0], model.n_users, n_sym)
    else:
        pmfs = np.array(initial_pmfs, dtype=np.float64)
    for _ in range(iters):
        pmfs = np.stack(
            [soft_decode_user(X, pmfs, model, k)
             for k in range(model.n_users)], axis=1)
    return pmfs[0] if single else pmfs


def sic_detect(x, model, iters=5):
    """Hard decisions from the final PMFs; argmax ties pick the smaller symbol."""
    pmfs = sic_soft_decode(x, model, iters=iters)
    points = np.asarray(model.constellation, dtype=np.float64)
    return points[np.argmax(pmfs, axis=-1)]
