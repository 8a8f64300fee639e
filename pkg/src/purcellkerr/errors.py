"""Exception and warning types shared across the package."""


class PurcellKerrError(Exception):
    """Base class for all purcellkerr errors."""


class ConfigError(PurcellKerrError):
    """Invalid, unknown, or out-of-range configuration input."""


class ConvergenceError(PurcellKerrError):
    """An iterative solver failed to reach its stopping tolerance."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class InstabilityError(PurcellKerrError):
    """Time-domain field blow-up (Courant violation or corrupted input)."""


class NumericalError(PurcellKerrError):
    """A numerically meaningless intermediate result (e.g. non-positive
    reference power in a ratio)."""


class ResidualEnergyWarning(UserWarning):
    """Field energy at the end of a time-domain run exceeded the decay
    target; high-Q in-gap ringing was truncated."""
