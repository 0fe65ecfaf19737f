class MatNetError(Exception):
    """Base class for library errors."""


class AdmissibilityError(MatNetError, ValueError):
    """Material constants violate thermodynamic admissibility."""


class ConvergenceError(MatNetError, RuntimeError):
    """An iterative solve failed to converge."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DegenerateNetworkError(MatNetError, ValueError):
    """All base-node weights are zero."""


class SingularInterfaceError(MatNetError, ArithmeticError):
    """The interface acoustic matrix of a block is singular."""


class InvalidSampleError(MatNetError, ValueError):
    """A sample cannot enter a relative-error metric."""


class SchemaError(MatNetError, ValueError):
    """A persisted artifact does not match the expected schema."""


class TrainingError(MatNetError, RuntimeError):
    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class ConfigError(MatNetError, ValueError):
    """A configuration cannot be satisfied."""
