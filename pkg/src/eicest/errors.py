"""Exception hierarchy shared by every module of the package."""


class EicError(Exception):
    """Base class for all package errors."""


class ConfigError(EicError):
    """A configuration tree failed validation."""


class ModelInvariantError(EicError):
    """A problem, model or prior violates one of its construction invariants."""


class OutOfSupport(EicError):
    """A parameter value lies outside the parameter space."""


class DomainError(EicError):
    """An observation lies outside the declared observation support."""


class DivisionByZeroSupport(EicError):
    """A likelihood ratio was requested where the reference density is zero."""


class NonNormalisablePrior(EicError):
    """A normalised quantity was requested under an improper prior."""


class IntegralNotConverged(EicError):
    """Adaptive quadrature failed to reach its tolerance.

    The best available estimate and its error bound are attached so that
    callers can decide whether to accept them.
    """

    def __init__(self, message, estimate=float("nan"), error=float("inf")):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class UnsupportedClass(EicError):
    """An operation was applied to a problem class it does not support."""


class SingularDivergence(EicError):
    """A divergence is infinite or at its singular boundary."""


class BoundaryTooClose(EicError):
    """A finite-difference stencil would leave the parameter space."""


class NonFiniteLoss(EicError):
    """A loss evaluation returned a non-finite value."""


class NoAnalyticForm(EicError):
    """No closed-form expression is registered for the requested quantity."""


class NoFiniteValue(EicError):
    """A metric was non-finite at every sampled point."""


class IllDefinedEstimator(EicError):
    """The estimator's defining metric is not well defined at a candidate."""


class InvalidSpectrum(EicError):
    """A risk attitude spectrum failed its invariant probes."""


class PreconditionViolated(EicError):
    """The inputs do not satisfy an operation's stated precondition."""


class UnsupportedTransform(EicError):
    """A transform cannot be applied to the given problem."""
