"""Exception types shared across the package."""


class MotionStitchError(Exception):
    """Base class for all library errors."""


class ShapeMismatch(MotionStitchError, ValueError):
    """An array argument has the wrong shape or length."""


class DegenerateRotation(MotionStitchError, ValueError):
    """6D rotation values cannot be orthonormalized (zero or parallel columns)."""


class InvalidMatrix(MotionStitchError, ValueError):
    """A matrix claimed to be a rotation is not orthonormal with det +1."""


class DegeneratePose(MotionStitchError, ValueError):
    """The facing direction of a pose is parallel to the up axis."""


class InvalidLength(MotionStitchError, ValueError):
    """A frame count is outside the valid range."""


class SchemaError(MotionStitchError, ValueError):
    """A data file does not follow its declared schema."""


class EmptyAction(MotionStitchError, ValueError):
    """An action description is empty after trimming whitespace."""


class MissingPrediction(MotionStitchError, KeyError):
    """An annotated action has no predicted part set."""


class ServiceUnavailable(MotionStitchError, RuntimeError):
    """The completion endpoint could not be reached or returned an error."""


class CacheMiss(MotionStitchError, KeyError):
    """Offline mode was requested but the prompt is not cached."""


class Incompatible(MotionStitchError, ValueError):
    """Two part sets overlap, so the motions cannot be strictly composed."""


class EmptyMotion(MotionStitchError, ValueError):
    """A motion with zero frames was passed where frames are required."""


class EmptyPartSet(MotionStitchError, ValueError):
    """A labeled motion without any body parts cannot be strictly composed."""


class EmptyLabelList(MotionStitchError, ValueError):
    """No usable action labels were given for text composition."""


class UnknownConjunction(MotionStitchError, KeyError):
    """The named conjunction is not present in the conjunction table."""


class DimMismatch(MotionStitchError, ValueError):
    """Vector operands have different dimensions."""


class LengthMismatch(MotionStitchError, ValueError):
    """Two trajectories have different frame counts."""


class TooShort(MotionStitchError, ValueError):
    """A trajectory has too few frames for the requested metric."""


class ZeroVector(MotionStitchError, ValueError):
    """An embedding with (near-)zero norm cannot be scored."""


class MissingEmbedding(MotionStitchError, KeyError):
    """A requested id is absent from the embedding file."""


class EmptyCorpus(MotionStitchError, ValueError):
    """The corpus holds no segments to sample from."""
