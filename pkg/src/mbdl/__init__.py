"""Model-based inference toolkit.

Classical detection, sparse recovery, message passing and smoothing
algorithms implemented side by side with learned counterparts that keep
the same interfaces, plus simulators, brute-force oracles and a
reproducible benchmark harness.
"""

__version__ = "0.1.0"
