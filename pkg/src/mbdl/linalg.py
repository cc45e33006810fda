"""Small dense linear-algebra helpers shared across modules.

Symmetric positive-definite systems are solved through Cholesky factors
with explicit forward/back substitution.  The substitution loops run
over matrix rows only, so they stay fast for the small, possibly deeply
batched systems that show up here (covariances of dimension <= a few
dozen, batched over many samples).
"""

import numpy as np


def spd_cholesky(A, what="matrix"):
    """Lower Cholesky factor(s) of A (..., n, n); fails on non-SPD input."""
    A = np.asarray(A, dtype=np.float64)
    if A.shape[-1] != A.shape[-2]:
        raise ValueError(f"{what}: expected square matrices, got {A.shape}")
    if not np.allclose(A, np.swapaxes(A, -1, -2), rtol=1e-9, atol=1e-12):
        raise ValueError(f"{what}: not symmetric")
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        raise ValueError(f"{what}: not positive definite") from None


def cho_solve(L, B):
    """Solve A X = B given the lower Cholesky factor L of A.

    Shapes broadcast: L is (..., n, n), B is (..., n) or (..., n, k).
    """
    L = np.asarray(L, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    n = L.shape[-1]
    vector = B.ndim == L.ndim - 1
    if vector:
        B = B[..., None]
    if B.shape[-2] != n:
        raise ValueError(f"rhs rows {B.shape[-2]} do not match system size {n}")
    Y = np.zeros(np.broadcast_shapes(L.shape[:-2], B.shape[:-2]) + B.shape[-2:])
    Y += B
    # forward substitution: L Y = B
    for i in range(n):
        for j in range(i):
            Y[..., i, :] -= L[..., i, j, None] * Y[..., j, :]
        Y[..., i, :] /= L[..., i, i, None]
    # back substitution: L^T X = Y
    X = Y
    for i in range(n - 1, -1, -1):
        for j in range(i + 1, n):
            X[..., i, :] -= L[..., j, i, None] * X[..., j, :]
        X[..., i, :] /= L[..., i, i, None]
    return X[..., 0] if vector else X


def spd_solve(A, B, what="matrix"):
    """Solve the SPD system A X = B via Cholesky."""
    return cho_solve(spd_cholesky(A, what=what), B)


def power_iteration_norm(A, iters=200, tol=1e-12, seed=1):
    """Largest eigenvalue of the PSD matrix A by power iteration."""
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    # fixed deterministic start: mixed-sign entries to avoid orthogonal starts
    v = np.cos(np.arange(1, n + 1) * float(seed) + 0.7)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = A @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        new_lam = float(v @ (A @ v))
        if abs(new_lam - lam) <= tol * max(1.0, abs(new_lam)):
            return new_lam
        lam = new_lam
    return lam
