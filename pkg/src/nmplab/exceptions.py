"""Exception types shared by all modules.

The CLI maps these onto process exit codes: usage problems exit with 2,
numerical failures with 3.
"""


class NMPError(Exception):
    """Base class for all package errors."""


class UsageError(NMPError, ValueError):
    """Invalid arguments or preconditions violated by the caller."""


class ModelError(NMPError):
    """The model cannot support the request (disconnected, size cap, mismatch)."""


class UnsupportedOperationError(ModelError):
    """Operation not defined for this model kind (e.g. gradients on graphs)."""


class NumericalFailure(NMPError, ArithmeticError):
    """A numerical procedure could not reach its requested accuracy."""
