"""Generic minibatch training loop over an ExprGraph."""

from dataclasses import dataclass

import numpy as np

from ..errors import DivergenceError, NonFiniteValue
from .optim import OptimizerState, optimizer_step


@dataclass
class TrainConfig:
    """Knobs shared by every learned component.

    ``optimizer`` is "adam" (default) or "sgd".  ``seed`` drives parameter
    init and batch shuffling, so a config + dataset pair fully determines
    the trained weights.
    """

    epochs: int = 100
    batch_size: int = 128
    lr: float = 1e-3
    optimizer: str = "adam"
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


def fit(graph, bind_batch, n_samples, config, rng, loss_node=None):
    """Minimize the graph's scalar root over minibatches.

    ``bind_batch(idx)`` returns the input bindings for the sample indices
    ``idx`` (always exactly ``config.batch_size`` long; the remainder of a
    shuffled epoch is dropped).  Returns a list of per-epoch mean losses.
    Divergence raises DivergenceError carrying the last finite parameters.
    """
    if n_samples < config.batch_size:
        raise ValueError(
            f"need at least batch_size={config.batch_size} samples, "
            f"got {n_samples}")
    state = OptimizerState(kind=config.optimizer, lr=config.lr)
    params = graph.get_params()
    snapshot = {k: v.copy() for k, v in params.items()}
    history = []
    n_batches = n_samples // config.batch_size
    for _ in range(config.epochs):
        order = rng.permutation(n_samples)
        epoch_loss = 0.0
        try:
            for b in range(n_batches):
                idx = order[b * config.batch_size:(b + 1) * config.batch_size]
                value = graph.eval(bind_batch(idx), root=loss_node)
                epoch_loss += float(value)
                grads = graph.backward(root=loss_node)
                optimizer_step(state, params, grads)
        except NonFiniteValue as exc:
            raise DivergenceError(
                f"training diverged: {exc}", checkpoint=snapshot) from exc
        snapshot = {k: v.copy() for k, v in params.items()}
        history.append(epoch_loss / n_batches)
    return history
