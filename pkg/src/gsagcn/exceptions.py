"""Exception types shared across the package.

Every error raised deliberately by this package derives from
:class:`GsaGcnError`, so callers can catch one base class.  The
subclasses also inherit the closest builtin (ValueError and friends)
to stay unsurprising in generic code.
"""


class GsaGcnError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(GsaGcnError, ValueError):
    """Operands have incompatible or invalid dimensions."""


class ParameterError(GsaGcnError, ValueError):
    """A scalar argument or configuration value is out of range."""


class SingularMatrixError(GsaGcnError, ArithmeticError):
    """A positive-definite solve hit a non-positive pivot.

    ``pivot`` is the 1-based index of the failing Cholesky pivot, which
    is how far the factorization got before giving up.
    """

    def __init__(self, pivot: int, message: str | None = None):
        self.pivot = pivot
        super().__init__(
            message
            or f"matrix is not positive definite: Cholesky pivot {pivot} is not positive"
        )


class DisconnectedGraphError(GsaGcnError, ValueError):
    """The operation is only defined on a connected graph.

    Spectral quantities of a disconnected graph are ambiguous (the
    principal eigenvector is no longer unique), so callers must extract
    a component first and analyse components separately.
    """


class AssumptionViolation(GsaGcnError, ValueError):
    """Input violates a stated precondition of a diagnostic check.

    Diagnostics report violated assumptions instead of silently
    patching the input; the caller decides whether to regularize.
    """


class DivergenceError(GsaGcnError, RuntimeError):
    """Training loss became non-finite."""

    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"training diverged: non-finite loss at epoch {epoch}")
