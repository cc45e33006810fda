"""L1-regularized least squares in the squared-error convention.

Every solver in this package minimizes the same functional

    J(s) = ||H s - x||^2 + lam * ||s||_1

with the *unhalved* data term, so the per-coordinate soft threshold is at
lam / 2 and the proximal step of a gradient method with step eta thresholds
at eta * lam / 2.  Mixing conventions is the classic way to get solvers
that disagree, so the threshold scaling is centralized here.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from ..autodiff import soft_threshold
from ..linalg import power_iteration_norm


@dataclass(frozen=True)
class LassoProblem:
    matrix: np.ndarray
    observation: np.ndarray
    lam: float

    def __post_init__(self):
        H = np.asarray(self.matrix, dtype=np.float64)
        x = np.asarray(self.observation, dtype=np.float64)
        if H.ndim != 2 or x.ndim != 1 or x.shape[0] != H.shape[0]:
            raise ValueError("matrix (M, N) and observation (M,) required")
        if not (np.all(np.isfinite(H)) and np.all(np.isfinite(x))):
            raise ValueError("non-finite problem data")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        object.__setattr__(self, "matrix", H)
        object.__setattr__(self, "observation", x)

    @property
    def n_coefficients(self):
        return self.matrix.shape[1]


def lasso_objective(problem, s):
    r = problem.matrix @ s - problem.observation
    return float(r @ r + problem.lam * np.sum(np.abs(s)))


def coordinate_descent(problem, iters=200, initial=None, tol=1e-10):
    """Cyclic exact minimization over one coordinate at a time.

    Each sweep sets s_i = T_{lam/2}(h_i . r_i) / ||h_i||^2 where r_i is the
    residual with coordinate i removed.  Stops early when a full sweep moves
    no coordinate by more than tol.  Zero columns keep their coefficient.
    """
    H = problem.matrix
    x = problem.observation
    col_sq = np.sum(H * H, axis=0)
    s = (np.zeros(problem.n_coefficients) if initial is None
         else np.array(initial, dtype=np.float64))
    r = x - H @ s
    for _ in range(iters):
        biggest = 0.0
        for i in range(problem.n_coefficients):
            if col_sq[i] == 0.0:
                continue
            rho = H[:, i] @ r + col_sq[i] * s[i]
            new = soft_threshold(rho, 0.5 * problem.lam) / col_sq[i]
            if new != s[i]:
                r += H[:, i] * (s[i] - new)
                biggest = max(biggest, abs(new - s[i]))
                s[i] = new
        if biggest <= tol:
            break
    return s


def ista(problem, iters=500, step=None, initial=None, tol=0.0):
    """Proximal gradient: s <- T_{step*lam/2}(s - step * H^T (H s - x)).

    The step must satisfy step <= 1 / ||H^T H||_2 for the iteration to be a
    descent on J; a larger requested step is shrunk to that bound with a
    warning.  A positive ``tol`` stops early once the sup-norm change of an
    iteration falls below it.
    """
    H = problem.matrix
    bound = 1.0 / power_iteration_norm(H.T @ H)
    if step is None:
        step = bound
    elif step > bound * (1.0 + 1e-12):
        warnings.warn(
            f"step {step:g} exceeds the stability bound {bound:g}; shrinking",
            RuntimeWarning, stacklevel=2)
        step = bound
    s = (np.zeros(problem.n_coefficients) if initial is None
         else np.array(initial, dtype=np.float64))
    x = problem.observation
    for _ in range(iters):
        s_next = soft_threshold(s - step * (H.T @ (H @ s - x)),
                                step * 0.5 * problem.lam)
        done = tol > 0.0 and float(np.max(np.abs(s_next - s))) < tol
        s = s_next
        if done:
            break
    return s
