from typing import Any, Optional, Sequence


class FeedcapError(Exception):
    """Base class for every error raised by the feedback_capacity package."""


class InvalidInputError(FeedcapError):
    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


class NumericalDomainError(FeedcapError):
    """A quantity left the domain where the formula is defined (log of 0, singular resolvent)."""


class PreconditionError(FeedcapError):
    pass


class ConvergenceError(FeedcapError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SolverStatusError(FeedcapError):
    def __init__(self, message: str, status: str):
        super().__init__(message)
        self.status = status


class DegenerateStrategyError(FeedcapError):
    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class CertificationError(FeedcapError):
    def __init__(self, message: str, certificate: Any = None):
        super().__init__(message)
        self.certificate = certificate


class OracleAmbiguityError(FeedcapError):
    def __init__(self, message: str, roots: Sequence[complex]):
        super().__init__(message)
        self.roots = list(roots)


class OptimizationError(FeedcapError):
    def __init__(self, message: str, incumbent: Any = None):
        super().__init__(message)
        self.incumbent = incumbent


class InstabilityError(FeedcapError):
    pass
