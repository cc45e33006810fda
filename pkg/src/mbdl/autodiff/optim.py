"""First-order optimizers acting on name -> array parameter dicts."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import NonFiniteValue


@dataclass
class OptimizerState:
    """Bookkeeping for sgd / adam.

    ``step`` counts completed updates; adam keeps first/second moment
    estimates per parameter name.  All arithmetic is plain float64, so a
    run with the same gradients reproduces bit-identically.
    """

    kind: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")


def optimizer_step(state, params, grads):
    """Apply one update in place; returns (params, state).

    sgd:  theta <- theta - lr * g
    adam: bias-corrected moment estimates, theta <- theta - lr * m^ / (sqrt(v^) + eps)
    """
    for name in params:
        if name not in grads:
            raise KeyError(f"missing gradient for parameter {name!r}")
        if not np.all(np.isfinite(grads[name])):
            raise NonFiniteValue(f"non-finite gradient for parameter {name!r}")
    state.step += 1
    if state.kind == "sgd":
        for name, theta in params.items():
            theta -= state.lr * grads[name]
        return params, state
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, theta in params.items():
        g = grads[name]
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(theta)
            state.m[name] = m
            state.v[name] = np.zeros_like(theta)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        theta -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state
