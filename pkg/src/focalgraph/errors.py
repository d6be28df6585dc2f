"""Exception types shared across the pipeline."""


class FocalGraphError(Exception):
    """Base class for all errors raised by this package."""


class MissingFileError(FocalGraphError):
    pass


class FormatError(FocalGraphError):
    """Malformed manifest or image file."""


class DimensionMismatchError(FocalGraphError):
    pass


class NonMonotonicFocalError(FocalGraphError):
    pass


class TooFewImagesError(FocalGraphError):
    pass


class InvalidSigmaError(FocalGraphError):
    pass


class OutOfBoundsError(FocalGraphError):
    pass


class DuplicateDepthError(FocalGraphError):
    pass


class NonPositiveMagnitudeError(FocalGraphError):
    pass


class NoPeakError(FocalGraphError):
    """Three-point fit degenerated to a line (zero curvature)."""


class DegenerateTriangleError(FocalGraphError):
    pass


class IndexOutOfRangeError(FocalGraphError):
    pass


class InvalidDepthCountError(FocalGraphError):
    pass


class StageError(FocalGraphError):
    """Pipeline failure attributed to a named stage."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
