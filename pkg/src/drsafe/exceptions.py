"""Exception hierarchy shared across the package."""


class DrsafeError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(DrsafeError, ValueError):
    pass


class NotPDError(DrsafeError, ValueError):
    """Matrix is not positive definite at the requested tolerance."""


class EmptyInput(DrsafeError, ValueError):
    pass


class InvalidConfig(DrsafeError, ValueError):
    pass


class EpsTooLarge(DrsafeError, ValueError):
    """Risk level exceeds 1/N; the sample-wise reformulation does not apply."""


class WrongM(DrsafeError, ValueError):
    """Check requires a single constraint."""


class ZeroRNorm(DrsafeError, ValueError):
    pass


class RadiusMismatch(DrsafeError, ValueError):
    """Configured radius exceeds the confidence radius for the sample count."""


class AllProbesInfeasible(DrsafeError, RuntimeError):
    pass


class NoPairs(DrsafeError, ValueError):
    """No paired necessary-check/solver records to score."""


class ConfigError(DrsafeError, ValueError):
    pass


class InfeasibleProbe(DrsafeError, RuntimeError):
    """The program is infeasible at a state where a solution was required."""
