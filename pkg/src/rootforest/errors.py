"""Exception types raised across the package."""


class RootForestError(Exception):
    """Base class for all package errors."""


class NotStronglyConnected(RootForestError):
    def __init__(self, source, target):
        self.source = source
        self.target = target
        super().__init__(f"no directed path from vertex {source} to vertex {target}")


class NonPositiveRate(RootForestError):
    pass


class DuplicateEdge(RootForestError):
    pass


class SizeCap(RootForestError):
    pass


class NoConvergence(RootForestError):
    pass


class Singular(RootForestError):
    pass


class SingularBlock(RootForestError):
    pass


class ComplexSpectrum(RootForestError):
    pass


class DivergesToInfinity(RootForestError):
    pass


class Exhausted(RootForestError):
    """Rejection sampling ran out of tries; carries the observed root-count histogram."""

    def __init__(self, max_tries, histogram):
        self.max_tries = max_tries
        self.histogram = dict(histogram)
        super().__init__(f"no sample accepted after {max_tries} tries; root counts seen: {self.histogram}")


class IterationCap(RootForestError):
    """Root-count targeting hit its iteration cap; carries the (q, roots) trace."""

    def __init__(self, trace):
        self.trace = list(trace)
        super().__init__(f"iteration cap reached; trace: {self.trace}")


class NotReversible(RootForestError):
    pass


class ReducibleBlock(RootForestError):
    pass


class ReducibleAfterAbsorption(RootForestError):
    pass


class GeometryMismatch(RootForestError):
    pass


class DecrementViolation(RootForestError):
    pass


class DuplicatePoint(RootForestError):
    pass


class PreconditionViolated(RootForestError):
    pass
