"""Graph-building helpers for dense networks.

All network code uses the column convention: activations are (features,
batch) matrices.  Because elementwise ops only broadcast scalars, biases
are stored as (features, 1) parameters and expanded over the batch with
an explicit outer product against a constant row of ones.
"""

import numpy as np


def ones_row(g, batch, name=None):
    return g.constant(np.ones((1, batch)), name=name)


def dense(g, x, weight, bias, ones, name=None):
    """weight @ x + bias expanded across columns. ``bias`` is (out, 1)."""
    wx = g.matmul(weight, x, name=None if name is None else name + "_wx")
    be = g.matmul(bias, ones, name=None if name is None else name + "_bias")
    return g.add(wx, be, name=name)


def glorot(rng, fan_out, fan_in):
    """Uniform Glorot-style init, driven by the toolkit RNG."""
    span = np.sqrt(6.0 / (fan_in + fan_out))
    return (rng.uniform((fan_out, fan_in)) * 2.0 - 1.0) * span


def dense_param_count(sizes):
    """Parameters in a dense chain with layer widths ``sizes``."""
    total = 0
    for d_in, d_out in zip(sizes[:-1], sizes[1:]):
        total += d_out * d_in + d_out
    return total
