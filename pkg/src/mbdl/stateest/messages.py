"""Per-node Gaussian messages for linear state-space smoothing.

For the model s_t = F s_{t-1} + w_t, x_t = H s_t + r_t with known s_0, the
log-joint of a trajectory estimate is, up to an additive constant,

    -0.5 sum_t (s_t - F s_{t-1})' W^-1 (s_t - F s_{t-1})
    -0.5 sum_t (x_t - H s_t)' R^-1 (x_t - H s_t).

Its gradient with respect to s_t splits into three messages meeting at the
variable node: one from the past factor, one from the future factor (zero
at t = T), and one from the observation factor:

    past_t   = -W^-1 (s_t - F s_{t-1})
    future_t =  F' W^-1 (s_{t+1} - F s_t)
    obs_t    =  H' R^-1 (x_t - H s_t)

The smoothers in this package ascend their sum; the finite-difference
tests check the sum against numerical gradients of the log-joint.
"""

import numpy as np

from ..linalg import cho_solve


def _model_mats(model):
    d = model.transition.shape[0]
    w_inv = cho_solve(model.chol_w, np.eye(d))
    r_inv = cho_solve(model.chol_r, np.eye(model.observation.shape[0]))
    return w_inv, r_inv


def _check_traj(shat, xs, model, s0):
    shat = np.asarray(shat, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    s0 = np.asarray(model.initial_state if s0 is None else s0,
                    dtype=np.float64)
    d = model.transition.shape[0]
    if shat.ndim != 2 or shat.shape[1] != d:
        raise ValueError(f"state trajectory must be (T, {d})")
    if xs.shape != (shat.shape[0], model.observation.shape[0]):
        raise ValueError("one observation row per trajectory row required")
    if s0.shape != (d,):
        raise ValueError(f"initial state must have {d} entries")
    return shat, xs, s0


def kalman_messages(shat, xs, model, s0=None):
    """The three incoming messages at every node; each is (T, d)."""
    shat, xs, s0 = _check_traj(shat, xs, model, s0)
    F = model.transition
    H = model.observation
    w_inv, r_inv = _model_mats(model)
    prev = np.vstack([s0[None, :], shat[:-1]])
    past = -(shat - prev @ F.T) @ w_inv.T
    future = np.zeros_like(shat)
    future[:-1] = (shat[1:] - shat[:-1] @ F.T) @ w_inv.T @ F
    obs = (xs - shat @ H.T) @ r_inv.T @ H
    return past, future, obs


def message_sum(shat, xs, model, s0=None):
    """Gradient of the log-joint at the current trajectory; (T, d)."""
    past, future, obs = kalman_messages(shat, xs, model, s0)
    return past + future + obs


def log_joint(shat, xs, model, s0=None):
    """Trajectory log-density up to an additive constant."""
    shat, xs, s0 = _check_traj(shat, xs, model, s0)
    F = model.transition
    H = model.observation
    w_inv, r_inv = _model_mats(model)
    prev = np.vstack([s0[None, :], shat[:-1]])
    dw = shat - prev @ F.T
    dr = xs - shat @ H.T
    return float(-0.5 * (np.sum(dw @ w_inv * dw) + np.sum(dr @ r_inv * dr)))
