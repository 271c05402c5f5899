"""Exception types shared by all modules."""


class FlatlineError(Exception):
    """Base class for every error raised by the package."""


class HypothesisFailure(FlatlineError):
    """A stated precondition of a construction does not hold.

    The CLI maps this family to exit code 2.
    """


# flat-kernel
class GluingMismatch(FlatlineError):
    pass


class Disconnected(FlatlineError):
    pass


class BadConeAngle(FlatlineError):
    pass


class ZeroDirection(FlatlineError):
    pass


class SingularityHit(FlatlineError):
    """A vertical segment ran into a cone point.

    ``partial`` is the flow length completed before the hit.
    """

    def __init__(self, message, partial=0.0, vertex_class=-1):
        super().__init__(message)
        self.partial = partial
        self.vertex_class = vertex_class


# connections
class BudgetExceeded(FlatlineError):
    pass


class GenusTooSmall(FlatlineError):
    pass


# delaunay
class FlipBudgetExceeded(FlatlineError):
    pass


# network
class SingularityInInterior(FlatlineError):
    pass


class NotConnected(HypothesisFailure):
    pass


class CoverageGap(HypothesisFailure):
    def __init__(self, message, witnesses=()):
        super().__init__(message)
        self.witnesses = list(witnesses)


# strips
class VerticalSaddleConnection(FlatlineError):
    pass


class RayBudgetExceeded(FlatlineError):
    pass


# slit-torus
class OutOfRange(FlatlineError):
    pass


class RationalSlopeTermination(FlatlineError):
    pass


class PrecisionExhausted(FlatlineError):
    def __init__(self, message, reached=0):
        super().__init__(message)
        self.reached = reached
