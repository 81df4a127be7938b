"""Exception hierarchy shared by all modules."""


class AsyncDGDError(Exception):
    """Base class for every error raised by this package."""


# topology
class GraphError(AsyncDGDError, ValueError):
    pass


class NotConnected(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class EndpointOutOfRange(GraphError):
    pass


class EigenFailure(AsyncDGDError):
    pass


class NotPositiveDefinite(AsyncDGDError, ValueError):
    pass


# objectives
class Unbounded(AsyncDGDError, ValueError):
    """Local cost has no finite lower bound."""


class EmptyPartition(AsyncDGDError, ValueError):
    pass


class BadLabel(AsyncDGDError, ValueError):
    pass


class TooFewSamples(AsyncDGDError, ValueError):
    pass


class MaxIterExceeded(AsyncDGDError, RuntimeError):
    pass


# operators
class DimensionMismatch(AsyncDGDError, ValueError):
    pass


class ZeroSelfWeight(AsyncDGDError, ValueError):
    pass


class StepTooLarge(AsyncDGDError, ValueError):
    pass


class NotStronglyConvex(AsyncDGDError, ValueError):
    pass


class MissingInf(AsyncDGDError, ValueError):
    pass


# async engine
class InfeasibleWindow(AsyncDGDError, ValueError):
    pass


class ValidationFailed(AsyncDGDError):
    pass


class ScheduleSpecMismatch(AsyncDGDError, ValueError):
    pass


class CorruptTrace(AsyncDGDError, ValueError):
    pass


class WorkerPanic(AsyncDGDError, RuntimeError):
    pass


class Timeout(AsyncDGDError, RuntimeError):
    pass


# cli
class ConfigError(AsyncDGDError, ValueError):
    pass
