"""Alternating direction method for the L1 problem and its plug-in variant.

Splitting J(s) = ||H s - x||^2 + lam ||v||_1 subject to s = v gives

    s  <- (alpha H^T H + I)^{-1} (alpha H^T x + v - u)
    v  <- D(s + u)
    u  <- u + s - v

where D is the proximal map of the regularizer at the split's scale.  For
the L1 norm D is the soft threshold at alpha * lam / 2.  pnp_admm runs the
*same* iteration but lets the caller pass any denoiser as D, so admm_solve
is literally pnp_admm with the soft threshold plugged in; the two produce
identical iterates when given the same D.
"""

import numpy as np

from ..autodiff import soft_threshold
from ..linalg import cho_solve, spd_cholesky


def _split_iterations(H, x, alpha, denoiser, iters, tol):
    if iters < 1:
        raise ValueError("iters must be >= 1")
    n = H.shape[1]
    gram = alpha * (H.T @ H) + np.eye(n)
    chol = spd_cholesky(gram)
    htx = alpha * (H.T @ x)
    s = np.zeros(n)
    v = np.zeros(n)
    u = np.zeros(n)
    for q in range(iters):
        s = cho_solve(chol, htx + v - u)
        v_prev = v
        v = denoiser(s + u)
        u = u + s - v
        # primal residual s - v and dual residual v - v_prev must both
        # settle; the primal alone dips transiently long before the fixed
        # point is reached
        if max(np.linalg.norm(s - v), np.linalg.norm(v - v_prev)) < tol:
            break
    return v, q + 1


def admm_solve(problem, alpha=1.0, iters=500, tol=1e-8):
    """L1 solve by operator splitting; returns the sparse split variable v.

    alpha > 0 trades iteration count against conditioning; every positive
    value converges to the same minimizer of the shared objective.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    thr = 0.5 * alpha * problem.lam

    def denoiser(t):
        return soft_threshold(t, thr)

    v, _ = _split_iterations(problem.matrix, problem.observation, alpha,
                             denoiser, iters, tol)
    return v


def pnp_admm(matrix, observation, denoiser, alpha=1.0, iters=100, tol=1e-8):
    """Plug-in splitting: any map R^N -> R^N can stand in for the prox.

    With denoiser = soft threshold at alpha*lam/2 this reproduces
    admm_solve bit for bit.  Returns (estimate, iterations_run).
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    H = np.asarray(matrix, dtype=np.float64)
    x = np.asarray(observation, dtype=np.float64)
    if H.ndim != 2 or x.shape != (H.shape[0],):
        raise ValueError("matrix (M, N) and observation (M,) required")
    return _split_iterations(H, x, alpha, denoiser, iters, tol)
