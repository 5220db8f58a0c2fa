"""Exception and warning types shared across the package."""


class ThermoredError(Exception):
    """Base class for all package errors."""


class DimensionError(ThermoredError, ValueError):
    """Matrix or vector shapes are inconsistent."""


class StabilityError(ThermoredError):
    """A system matrix is not Hurwitz where stability is required."""


class StepError(ThermoredError):
    """The implicit Euler iteration matrix is singular."""


class SplitError(ThermoredError):
    """Truncating at the requested order yields an unstable leading block."""


class ReductionError(ThermoredError):
    """The model cannot be reduced (e.g. no controllable-observable part)."""


class ConvergenceError(ThermoredError):
    """An iterative solve did not converge.

    ``residual`` carries the last residual and ``where`` an optional
    description of the offending step.
    """

    def __init__(self, message, residual=float("nan"), where=None):
        super().__init__(message)
        self.residual = residual
        self.where = where


class ConfigError(ThermoredError, ValueError):
    """Invalid building, weather or run configuration."""


class TopologyError(ConfigError):
    """A link or boundary names a zone that does not exist."""


class RangeError(ThermoredError, ValueError):
    """A time lies outside the range covered by a series."""


class MinimalityWarning(UserWarning):
    """The realization is not numerically minimal."""


class RankWarning(UserWarning):
    """A least-squares problem is rank deficient."""
