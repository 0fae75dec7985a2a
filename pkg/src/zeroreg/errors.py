"""Exception hierarchy shared by all zeroreg modules."""


class ZeroRegError(Exception):
    """Base class for all errors raised by this package."""


class WriteError(ZeroRegError):
    """Bundle serialization failed; message names the failing path."""


class FormatError(ZeroRegError):
    """On-disk bundle data is missing, malformed, or inconsistent with its manifest."""


class ValidationError(ZeroRegError):
    """A loaded or constructed object violates a documented invariant."""


class ConfigError(ZeroRegError):
    """Configuration file or value is invalid (includes unknown keys)."""


class EmptyInputError(ZeroRegError):
    """An operation requiring at least one element received none."""


class ZeroVectorError(ZeroRegError):
    """A feature vector with zero norm where a direction is required."""


class EmptySceneError(ZeroRegError):
    """No object region survived multi-view consistency filtering."""


class ShapeError(ZeroRegError):
    """Array arguments have inconsistent shapes."""


class SizeLimitError(ZeroRegError):
    """Problem instance exceeds the exact solver's enumeration budget."""


class NumericalError(ZeroRegError):
    """Non-finite values where finite numerics are required."""


class InsufficientDataError(ZeroRegError):
    """Too few correspondences or points for the requested estimate."""


class DegenerateConfigError(ZeroRegError):
    """Point configuration is rank-deficient (e.g. collinear) for a rigid fit."""


class NoConsensusError(ZeroRegError):
    """RANSAC found no hypothesis with any inlier support."""


class EmptyRenderError(ZeroRegError):
    """No point projects into the requested view."""


class GenerationError(ZeroRegError):
    """Synthetic scene constraints are infeasible for the given spec."""


class StageFailure(ZeroRegError):
    """A pipeline stage failed; carries the stage name and the causal error."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
