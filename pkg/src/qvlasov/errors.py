"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class ForceFileError(ValueError):
    """A VQFF1 container could not be parsed or does not match the run."""


class OracleMismatchError(AssertionError):
    """Sparse-access oracles disagree with the assembled matrix."""

    def __init__(self, message, first=None, count=0):
        super().__init__(message)
        self.first = first
        self.count = count


class KrylovConvergenceError(RuntimeError):
    """Lanczos propagation failed to meet its tolerance within the iteration cap."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual
