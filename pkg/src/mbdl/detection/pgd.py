"""Projected gradient descent detection.

Each iteration takes a gradient step on the squared residual and snaps the
result back onto the constellation:

    s_next = P(s - step * H^T (H s - x))

P maps every entry to the nearest constellation point; equidistant points
resolve to the lower-indexed (smaller) symbol, so for antipodal symbols P
acts like sign() with sign(0) = -1.
"""

import numpy as np

from ..linalg import power_iteration_norm


def project_to_constellation(values, constellation):
    """Nearest constellation point per entry, ties toward the smaller symbol."""
    points = np.asarray(constellation, dtype=np.float64)
    if points.size == 1:
        return np.full_like(np.asarray(values, dtype=np.float64), points[0])
    midpoints = 0.5 * (points[:-1] + points[1:])
    idx = np.searchsorted(midpoints, values, side="left")
    return points[idx]


def pgd_detect(x, model, iters=100, step=None, initial=None):
    """Run projected gradient detection; x is (N,) or (B, N).

    step defaults to 1 / ||H^T H||_2 which keeps the unprojected descent
    non-expansive.  Returns hard symbol decisions shaped like the input.
    """
    H = model.matrix
    if step is None:
        step = 1.0 / power_iteration_norm(H.T @ H)
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != model.n_out:
        raise ValueError(f"observations have {X.shape[1]} entries, "
                         f"channel outputs {model.n_out}")
    if initial is None:
        S = np.zeros((X.shape[0], model.n_users))
    else:
        S = np.broadcast_to(
            np.asarray(initial, dtype=np.float64),
            (X.shape[0], model.n_users)).copy()
    # the raw initial guess is NOT snapped first: the first update must be
    # taken from it (a zero start would otherwise bias every entry to the
    # smallest symbol and often sit at a projection fixed point)
    HtH = H.T @ H
    HtX = X @ H
    for _ in range(iters):
        grad = S @ HtH.T - HtX
        S = project_to_constellation(S - step * grad, model.constellation)
    if iters < 1:
        S = project_to_constellation(S, model.constellation)
    return S[0] if single else S
