"""Exception hierarchy shared by every solver stage.

Each class maps onto one CLI exit code through :func:`exit_code_for`.
"""


class DetShockError(Exception):
    """Base class for all package errors."""


class ConfigError(DetShockError, ValueError):
    """Invalid or unreadable run configuration."""


class DomainError(DetShockError, ValueError):
    """An argument lies outside the domain of a thermodynamic relation."""


class RangeError(DetShockError, ValueError):
    """Momentum density too large for a subsonic density to exist."""


class ConvergenceError(DetShockError, RuntimeError):
    """An iterative method failed to meet its tolerance.

    Parameters
    ----------
    message : str
        Human-readable summary.
    history : list of float, optional
        Residual or step history up to the failure.
    last_iterate : object, optional
        The final iterate, for diagnosis.
    """

    def __init__(self, message, history=None, last_iterate=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []
        self.last_iterate = last_iterate


class BranchCollisionError(ConvergenceError):
    """Strong and weak polar roots merge: the wedge is at or past detachment."""


class GeometryError(DetShockError, ValueError):
    """A shock/body configuration that cannot bound a cut-off domain."""


class FoldedGridError(GeometryError):
    """The body-fitted map has a non-positive Jacobian somewhere."""


class EllipticityError(DetShockError, RuntimeError):
    """The frozen coefficient matrix stopped being uniformly elliptic."""


class AdmissibilityError(DetShockError, RuntimeError):
    """A node reached or passed the sonic momentum density."""


class LinearSolverError(DetShockError, RuntimeError):
    """The sparse direct solve broke down."""


class DenominatorError(DetShockError, RuntimeError):
    """The shock-slope quotient lost its lower bound on the denominator."""


class VerificationError(DetShockError):
    """Raised by callers that treat a failed certificate as fatal."""


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the CLI exit-code contract (1 config, 2 solver)."""
    if isinstance(exc, (ConfigError, FileNotFoundError)):
        return 1
    if isinstance(exc, VerificationError):
        return 3
    return 2
