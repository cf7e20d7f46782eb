"""Exception hierarchy shared across the package."""


class TaskLDPError(Exception):
    """Base class for all errors raised by this package."""


class NotPositiveDefinite(TaskLDPError):
    """A matrix expected to be symmetric positive definite is not."""


class NoConvergence(TaskLDPError):
    """An iterative routine hit its iteration cap without converging."""


class SingularTriangular(TaskLDPError):
    """A triangular solve met a (near-)zero diagonal entry."""


class DimensionMismatch(TaskLDPError):
    """Operand shapes are incompatible."""


class ParseError(TaskLDPError):
    """A text input failed to parse; carries row/column location."""

    def __init__(self, message, row=None, col=None):
        super().__init__(message)
        self.row = row
        self.col = col


class RaggedRows(ParseError):
    """CSV rows have inconsistent lengths."""


class ConstantColumn(TaskLDPError):
    """A column has zero spread and cannot be standardized."""


class TooFewSamples(TaskLDPError):
    """Not enough samples for the requested estimate."""


class EmptyData(TaskLDPError):
    """An operation received an empty data set."""


class NonPositiveEpsilon(TaskLDPError):
    """Privacy budget must be strictly positive."""


class ScaleZero(TaskLDPError):
    """A zero-scale mechanism cannot separate distinct inputs."""


class SingularNoiselessEncoder(TaskLDPError):
    """Noiseless decoding requires a nonsingular encoder Gram matrix."""


class AllEigenvaluesZero(TaskLDPError):
    """The task carries no energy; the allocation is undefined."""


class BadLatentDim(TaskLDPError):
    """Latent dimension outside the valid range."""


class BadTarget(TaskLDPError):
    """Loss target outside the valid range for the chosen loss."""


class TapeMismatch(TaskLDPError):
    """A backward pass received a tape from a different forward pass."""


class DivergenceError(TaskLDPError):
    """Training loss became non-finite or exceeded the abort threshold.

    Carries the trace collected up to the point of failure.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
