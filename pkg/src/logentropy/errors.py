"""Exception types raised by the solvers and functionals."""


class LogEntropyError(Exception):
    """Base class for every error raised by this package."""


class NonPositiveField(LogEntropyError, ValueError):
    """A field that must be strictly positive has a node <= 0."""


class ZeroField(LogEntropyError, ValueError):
    pass


class NotNormalized(LogEntropyError, ValueError):
    """The field does not satisfy int u^2 dvol = 1 within tolerance."""


class DomainError(LogEntropyError, ValueError):
    """An argument lies outside the domain of a functional (e.g. omega <= 0)."""


class NonPositiveTau(DomainError):
    pass


class SingularTime(LogEntropyError):
    """The flow reached (or would step past) its singular time."""


class StepTooLarge(LogEntropyError):
    """The explicit step violates the stability / maximum-principle bound."""


class PositivityLost(LogEntropyError):
    pass


class TimeMisaligned(LogEntropyError, ValueError):
    """A requested time is not a node of the trajectory time grid."""


class NoConvergence(LogEntropyError):
    pass


class HypothesisViolated(LogEntropyError):
    """The remainder does not satisfy a > -lambda0 at the start of the flow."""
