"""Shared exception types.

Contract-violation errors raise plain ValueError with a descriptive
message; the classes below exist where callers need to distinguish
numerical failure modes programmatically.
"""


class ShapeMismatch(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class UsageError(ValueError):
    """Bad user input at the harness boundary: malformed config, unknown
    experiment kind, missing files or columns.  The CLI maps this to exit
    code 2."""


class NonFiniteValue(FloatingPointError):
    """A NaN or infinity appeared where the contract requires finite values."""


class DivergenceError(RuntimeError):
    """An iterative procedure diverged.

    When raised during training, ``checkpoint`` holds the last set of
    finite parameter values (name -> array), so callers can salvage them.
    """

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint
