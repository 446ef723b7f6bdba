"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit 2,
property/verification failures exit 1.  Numerical errors inside a solver
flag the affected experiment row but do not abort a schedule.
"""


class PdegamesError(Exception):
    """Base class for all package errors."""


class InputError(PdegamesError, ValueError):
    """A caller passed an argument outside an operation's precondition."""


class ConfigError(PdegamesError, ValueError):
    """A configuration value is malformed or names an unknown registry entry."""


class NumericalError(PdegamesError, RuntimeError):
    """A quadrature or solver failed to meet its error tolerance.

    Carries the best value and the estimated error so callers can decide
    whether to keep a flagged result.
    """

    def __init__(self, message: str, value: float | None = None,
                 error_estimate: float | None = None):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate
