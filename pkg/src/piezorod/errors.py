"""Exception types shared across the package."""


class PiezorodError(Exception):
    """Base class for all package-specific errors."""


class InvalidThresholdError(PiezorodError, ValueError):
    """A play threshold was not strictly positive."""


class GridMismatchError(PiezorodError, ValueError):
    """Two play banks do not share the same threshold grid."""


class CapabilityError(PiezorodError, ValueError):
    """A density model was asked for a derivative it cannot provide."""


class DensityConstructionError(PiezorodError, ValueError):
    """Density parameters violate their admissibility bounds."""


class BracketError(PiezorodError, RuntimeError):
    """The feedback root finder could not bracket a sign change."""


class ConvergenceError(PiezorodError, RuntimeError):
    """An iterative solve did not reach its tolerance."""

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class InvalidInitialDataError(PiezorodError, ValueError):
    """Initial data violates a precondition (e.g. nonpositive temperature)."""


class InvalidMaterialError(PiezorodError, ValueError):
    """Material coefficients violate their constraints at run time."""


class ConfigError(PiezorodError, ValueError):
    """A scenario configuration failed validation.

    ``violations`` lists every problem found, each prefixed with the
    dotted path of the offending field.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class SolverError(PiezorodError, RuntimeError):
    """A time step failed; partial results may still be available."""
