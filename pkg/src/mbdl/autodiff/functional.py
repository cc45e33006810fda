"""Numerical kernels for activations, softmax and losses.

These operate directly on float64 ndarrays and are the single source of
truth for the forward formulas; the graph ops in :mod:`mbdl.autodiff.graph`
call into them so the standalone and differentiable paths cannot drift.
"""

import numpy as np

PROB_FLOOR = 1e-12


def _as_f64(x):
    return np.asarray(x, dtype=np.float64)


def relu(x):
    """max(x, 0) elementwise."""
    return np.maximum(_as_f64(x), 0.0)


def sigmoid(x):
    """Logistic function 1 / (1 + exp(-x)), evaluated stably."""
    x = _as_f64(x)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softsign(x):
    """x / (1 + |x|): a cheap squashing map onto (-1, 1)."""
    x = _as_f64(x)
    return x / (1.0 + np.abs(x))


def softplus(x):
    """log(1 + exp(x)), evaluated stably."""
    return np.logaddexp(0.0, _as_f64(x))


def soft_threshold(x, b):
    """Shrinkage operator sign(x) * max(|x| - b, 0). Requires b >= 0."""
    x = _as_f64(x)
    b = _as_f64(b)
    if np.any(b < 0):
        raise ValueError("soft_threshold requires a nonnegative threshold")
    return np.sign(x) * np.maximum(np.abs(x) - b, 0.0)


def exp_clamped(x, clamp=None):
    """exp(x), optionally with the exponent clipped to [-clamp, clamp].

    Unclamped overflow produces inf without warning here; graph evaluation
    turns that into a NonFiniteValue error naming the node.
    """
    x = _as_f64(x)
    if clamp is not None:
        x = np.clip(x, -clamp, clamp)
    with np.errstate(over="ignore"):
        return np.exp(x)


def tanh_interval(x, lo, hi):
    """Map the real line onto (lo, hi) via lo + (hi-lo)*(1+tanh(x))/2."""
    if not hi > lo:
        raise ValueError(f"tanh_interval needs hi > lo, got [{lo}, {hi}]")
    return lo + (hi - lo) * 0.5 * (1.0 + np.tanh(_as_f64(x)))


_ACTIVATIONS = {
    "relu": relu,
    "sigmoid": sigmoid,
    "softsign": softsign,
    "softplus": softplus,
    "soft_threshold": soft_threshold,
    "exp": exp_clamped,
    "tanh_interval": tanh_interval,
}


def apply_activation(kind, x, **params):
    """Apply a named activation; extra parameters go to the kernel.

    Kinds: relu, sigmoid, softsign, softplus, soft_threshold(b),
    exp(clamp=None), tanh_interval(lo, hi).
    """
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation kind {kind!r}") from None
    return fn(x, **params)


def softmax(x, axis=0):
    """Stable softmax along ``axis``: exp(x - max) normalized to sum 1."""
    x = _as_f64(x)
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def _batch_count(a):
    # column convention: 2-D arrays hold one sample per column
    return a.shape[1] if a.ndim == 2 else 1


def mse(predictions, targets):
    """Mean over samples of the squared error norm.

    2-D inputs are (features, samples); 1-D or scalar inputs count as a
    single sample, so the value is just the squared error norm.
    """
    p = _as_f64(predictions)
    t = _as_f64(targets)
    if p.shape != t.shape:
        raise ValueError(f"mse shape mismatch {p.shape} vs {t.shape}")
    return float(np.sum((p - t) ** 2) / _batch_count(p))


def as_one_hot(labels, n_classes):
    """Integer labels (n,) -> one-hot columns (n_classes, n)."""
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError("labels must be 1-D")
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError("label out of range")
    out = np.zeros((n_classes, labels.shape[0]))
    out[labels, np.arange(labels.shape[0])] = 1.0
    return out


def cross_entropy(predictions, targets):
    """Mean cross-entropy -sum(t * log p) over samples.

    ``predictions`` are probabilities (classes,) or (classes, samples);
    columns need not sum to one, but every entry must lie in [0, 1].
    ``targets`` is either a matching one-hot array or integer labels.
    Probabilities are clamped to [1e-12, 1] before the log.
    """
    p = _as_f64(predictions)
    if np.any(p < -1e-9) or np.any(p > 1.0 + 1e-9):
        raise ValueError("cross_entropy got probabilities outside [0, 1]")
    t = np.asarray(targets)
    if t.ndim == p.ndim - 1 or (p.ndim == 1 and t.ndim == 0):
        t = as_one_hot(np.atleast_1d(t).astype(int), p.shape[0])
        if p.ndim == 1:
            t = t[:, 0]
    t = _as_f64(t)
    if t.shape != p.shape:
        raise ValueError(f"cross_entropy shape mismatch {p.shape} vs {t.shape}")
    logp = np.log(np.clip(p, PROB_FLOOR, 1.0))
    return float(-np.sum(t * logp) / _batch_count(p))


def weighted_l2_per_layer(layer_predictions, targets, weights):
    """sum_q weights[q] * (mean over samples of ||pred_q - target||^2)."""
    if len(layer_predictions) != len(weights):
        raise ValueError("one weight per layer prediction required")
    return float(sum(w * mse(p, targets) for p, w in zip(layer_predictions, weights)))


_LOSSES = {"mse": mse, "cross_entropy": cross_entropy}


def loss(kind, predictions, targets, **params):
    """Dispatch by name: mse, cross_entropy, weighted_l2.

    weighted_l2 takes ``predictions`` as a sequence of per-layer arrays and
    a ``weights`` keyword.
    """
    if kind == "weighted_l2":
        return weighted_l2_per_layer(predictions, targets, **params)
    try:
        fn = _LOSSES[kind]
    except KeyError:
        raise ValueError(f"unknown loss kind {kind!r}") from None
    return fn(predictions, targets, **params)
