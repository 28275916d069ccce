"""Exception hierarchy shared by all obpclab modules."""


class ObpcError(Exception):
    """Base class for all errors raised by obpclab."""


class InvalidParameterError(ObpcError, ValueError):
    """A constructor or operation argument violates its contract."""


class OutOfRangeError(ObpcError, ValueError):
    """A time query falls outside the covered span of a signal."""


class ContiguityError(ObpcError):
    """Appended history segments do not line up on the time grid."""


class ConsistencyError(ObpcError):
    """Overlapping history samples disagree at the junction point."""


class PreconditionError(ObpcError):
    """A documented operation precondition does not hold for the inputs."""


class ContractViolationError(ObpcError):
    """An operation was called on a model instance of the wrong kind."""


class DivergenceError(ObpcError):
    """Integration produced a non-finite or absurdly large state.

    Carries the first simulation time at which the state went bad.
    """

    def __init__(self, time, message=None):
        self.time = time
        super().__init__(message or f"state diverged at t = {time}")


class OptimizationFailureError(ObpcError):
    """Every optimizer start produced a non-finite cost."""


class CertificateError(ObpcError):
    """A stability certificate does not apply to the given data."""


class NumericalError(ObpcError):
    """A numerical routine failed to converge or hit a singular system."""
