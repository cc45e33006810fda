"""Trajectory smoothing: message-passing ascent and its exact oracle.

gradient_smoother climbs the Gaussian log-joint by adding the scaled
message sum at every node; for a linear model the log-joint is a concave
quadratic, so with a line search this converges to the MAP trajectory.
batch_map solves the same problem exactly: the stationarity conditions
form a block-tridiagonal linear system which is assembled densely and
solved in one shot.  The two must agree, which is the main correctness
test for the message algebra.
"""

import numpy as np

from ..errors import DivergenceError
from .messages import _model_mats, log_joint, message_sum


def gradient_smoother(xs, model, s0=None, iters=500, step=0.05,
                      line_search=True, tol=1e-12, initial=None):
    """Ascend the log-joint from ``initial`` (default zeros).

    With line_search the step is halved (up to 30 times) whenever a move
    would lower the log-joint; if no shrink helps the trajectory is
    returned as converged.  Without line_search the update is applied
    verbatim every iteration, which keeps the loop identical to the
    learned smoother's and is what the equivalence tests rely on.
    Returns (trajectory, log-joint history).
    """
    xs = np.asarray(xs, dtype=np.float64)
    T = xs.shape[0]
    d = model.d_state
    shat = (np.zeros((T, d)) if initial is None
            else np.array(initial, dtype=np.float64))
    history = []
    if not line_search:
        for _ in range(iters):
            shat = shat + step * message_sum(shat, xs, model, s0)
            if not np.all(np.isfinite(shat)):
                raise DivergenceError(
                    "smoother diverged; reduce the step size")
        history.append(log_joint(shat, xs, model, s0))
        return shat, history
    current = log_joint(shat, xs, model, s0)
    history.append(current)
    for _ in range(iters):
        grad = message_sum(shat, xs, model, s0)
        if np.max(np.abs(grad)) < tol:
            break
        t = step
        accepted = False
        for _ in range(30):
            trial = shat + t * grad
            value = log_joint(trial, xs, model, s0)
            if value >= current:
                shat, current = trial, value
                accepted = True
                break
            t *= 0.5
        history.append(current)
        if not accepted:
            break
    return shat, history


def batch_map(xs, model, s0=None):
    """Exact MAP trajectory via the block-tridiagonal normal equations.

    Stationarity of the log-joint in every s_t gives, with U = W^-1 and
    V = H' R^-1 H,

        (U + F'UF 1{t<T} + V) s_t - UF s_{t-1} - F'U s_{t+1} = H'R^-1 x_t

    plus UF s_0 on the right of the first row.  Dense assembly is O((Td)^2)
    memory, fine at the trajectory lengths this package targets.
    """
    xs = np.asarray(xs, dtype=np.float64)
    s0 = np.asarray(model.initial_state if s0 is None else s0,
                    dtype=np.float64)
    T = xs.shape[0]
    d = model.d_state
    F = model.transition
    H = model.observation
    w_inv, r_inv = _model_mats(model)
    v = H.T @ r_inv @ H
    uf = w_inv @ F
    fu = F.T @ w_inv
    diag_mid = w_inv + fu @ F + v
    diag_last = w_inv + v
    A = np.zeros((T * d, T * d))
    rhs = np.empty((T, d))
    for t in range(T):
        block = diag_last if t == T - 1 else diag_mid
        A[t * d:(t + 1) * d, t * d:(t + 1) * d] = block
        if t + 1 < T:
            A[t * d:(t + 1) * d, (t + 1) * d:(t + 2) * d] = -fu
            A[(t + 1) * d:(t + 2) * d, t * d:(t + 1) * d] = -uf
        rhs[t] = H.T @ (r_inv @ xs[t])
    rhs[0] += uf @ s0
    return np.linalg.solve(A, rhs.ravel()).reshape(T, d)
