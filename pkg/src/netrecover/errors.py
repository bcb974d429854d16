"""Exception and warning types raised across the package."""


class NetRecoverError(Exception):
    """Base class for all package errors."""


class EmptyGraph(NetRecoverError, ValueError):
    pass


class InfeasibleParams(NetRecoverError, ValueError):
    pass


class GenerationStalled(NetRecoverError, RuntimeError):
    pass


class ParseError(NetRecoverError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DomainViolation(NetRecoverError, ValueError):
    pass


class NonFinite(NetRecoverError, FloatingPointError):
    def __init__(self, message, vertex=None):
        self.vertex = vertex
        super().__init__(message)


class BadSampleSize(NetRecoverError, ValueError):
    pass


class WalkStalled(NetRecoverError, RuntimeError):
    pass


class InsufficientSample(NetRecoverError, ValueError):
    pass


class MissingObservation(NetRecoverError, ValueError):
    pass


class MissingMeanDegree(MissingObservation):
    pass


class NoSteadyState(NetRecoverError, RuntimeError):
    pass


class MissingBoundary(NetRecoverError, ValueError):
    pass


class IterationDiverged(NetRecoverError, RuntimeError):
    pass


class NegativeResidualDegree(UserWarning):
    """Estimated degree fell below the observed induced degree and was clamped."""


class EstimatorClamped(UserWarning):
    """A resilience correction produced an inadmissible value and was clamped."""


class DisconnectedGraphWarning(UserWarning):
    pass
