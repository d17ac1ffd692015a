"""Exception hierarchy for cspkit."""


class CSPError(Exception):
    """Base class for all errors raised by cspkit."""


class EvaluationDomainError(CSPError, ValueError):
    """A vector field returned a non-finite value."""


class DifferentiationError(CSPError, ArithmeticError):
    """Finite differencing produced non-finite entries."""


class SpectrumError(CSPError, ArithmeticError):
    def __init__(self, message, block=None):
        super().__init__(message)
        self.block = block


class PreconditionError(CSPError, ValueError):
    pass


class DivergenceError(CSPError, ArithmeticError):
    def __init__(self, message, last_time=None):
        super().__init__(message)
        self.last_time = last_time


class InvalidBasisError(CSPError, ValueError):
    pass


class RefinementSingularityError(CSPError, ArithmeticError):
    """The fast-fast block of Lambda is too ill-conditioned to invert."""

    def __init__(self, message, point=None, level=None, condition=None):
        super().__init__(message)
        self.point = point
        self.level = level
        self.condition = condition


class ManifoldSolveError(CSPError, ArithmeticError):
    def __init__(self, message, y=None, last_iterate=None, residuals=None, failed_nodes=None):
        super().__init__(message)
        self.y = y
        self.last_iterate = last_iterate
        self.residuals = residuals or []
        self.failed_nodes = failed_nodes or []


class DomainError(CSPError, ValueError):
    """Query outside the region covered by a table or grid."""


class DegenerateFrameError(CSPError, ArithmeticError):
    pass


class ProjectionError(CSPError, ArithmeticError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class InsufficientDataError(CSPError, ValueError):
    pass
