"""Lorenz attractor ground truth and Taylor-series transition models.

Ground truth integrates ds/dt = f(s) with classic RK4 at step dt, where

    f(s) = (sigma (s2 - s1), s1 (rho - s3) - s2, s1 s2 - beta s3)

with the standard chaotic parameters sigma=10, rho=28, beta=8/3.  The
assumed (mismatched) discrete-time model truncates the matrix exponential
of the Jacobian A at a linearization point:

    F_j = sum_{k=0}^{j} (A dt)^k / k!

so j=1 is a plain Euler linearization and larger j tracks exp(A dt).
"""

from dataclasses import dataclass
from math import factorial

import numpy as np

from .rng import CounterRng
from .statespace import StateSpaceModel

SIGMA = 10.0
RHO = 28.0
BETA = 8.0 / 3.0

# a point near the attractor's center of mass; linearizing here gives a
# usable single-matrix model for short segments anywhere on the attractor
ATTRACTOR_REFERENCE = np.array([-5.9, -5.6, 24.4])


def lorenz_rhs(s):
    s = np.asarray(s, dtype=np.float64)
    return np.array([
        SIGMA * (s[1] - s[0]),
        s[0] * (RHO - s[2]) - s[1],
        s[0] * s[1] - BETA * s[2],
    ])


def lorenz_jacobian(s):
    s = np.asarray(s, dtype=np.float64)
    return np.array([
        [-SIGMA, SIGMA, 0.0],
        [RHO - s[2], -1.0, -s[0]],
        [s[1], s[0], -BETA],
    ])


def rk4_step(s, dt):
    s = np.asarray(s, dtype=np.float64)
    k1 = lorenz_rhs(s)
    k2 = lorenz_rhs(s + 0.5 * dt * k1)
    k3 = lorenz_rhs(s + 0.5 * dt * k2)
    k4 = lorenz_rhs(s + dt * k3)
    return s + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def taylor_transition(order, dt, around):
    """F = sum_{k<=order} (A dt)^k / k! with A the Jacobian at ``around``."""
    if order < 1:
        raise ValueError("order must be >= 1")
    A = lorenz_jacobian(around) * dt
    F = np.eye(3)
    term = np.eye(3)
    for k in range(1, order + 1):
        term = term @ A
        F = F + term / factorial(k)
    return F


def lorenz_taylor_model(order, dt=0.02, around=None, process_std=0.5,
                        obs_std=None):
    """Assumed state-space model for smoothing noisy Lorenz observations.

    Observations are the full state plus noise (H = I, R = 0.1 I by
    default, i.e. obs_std = sqrt(0.1)); W = process_std^2 I absorbs the
    Taylor truncation error as fictitious process noise.
    """
    around = ATTRACTOR_REFERENCE if around is None else np.asarray(around)
    obs_var = 0.1 if obs_std is None else float(obs_std) ** 2
    return StateSpaceModel(
        transition=taylor_transition(order, dt, around),
        observation=np.eye(3),
        process_cov=process_std ** 2 * np.eye(3),
        obs_cov=obs_var * np.eye(3),
        initial_state=around.astype(np.float64),
    )


def sample_lorenz_trajectories(n_traj, T, dt=0.02, seed=0, obs_std=None,
                               start=None, spread=1.0, settle_steps=0):
    """RK4 ground truth plus noisy full-state observations.

    Each trajectory starts from ``start`` (default: the attractor
    reference) perturbed by N(0, spread^2), optionally settled onto the
    attractor for ``settle_steps`` RK4 steps before recording.  Short
    horizons with settle_steps=0 keep trajectories in a tube around the
    reference, which is what the fixed-linearization assumed model is
    good for.  Returns (S (n, T, 3), X (n, T, 3)).
    """
    rng = CounterRng(seed)
    base = ATTRACTOR_REFERENCE if start is None else np.asarray(start)
    obs_sd = np.sqrt(0.1) if obs_std is None else float(obs_std)
    S = np.empty((n_traj, T, 3))
    for tr in range(n_traj):
        s = base + spread * rng.normal((3,))
        for _ in range(settle_steps):
            s = rk4_step(s, dt)
        for i in range(T):
            s = rk4_step(s, dt)
            S[tr, i] = s
    X = S + obs_sd * rng.normal(S.shape)
    return S, X
