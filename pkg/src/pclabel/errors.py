"""Exception types shared across the annotation engine."""


class AnnotationError(Exception):
    """Base class for every error this package raises on purpose."""


class FormatError(AnnotationError):
    """A file does not conform to its expected layout."""


class SchemaVersionError(FormatError):
    """A session file was written with an incompatible schema version."""


class ParameterError(AnnotationError, ValueError):
    """An algorithm parameter is outside its valid range."""


class InsufficientPointsError(AnnotationError):
    """Not enough points for the requested geometric fit."""


class DegenerateGeometryError(AnnotationError):
    """Input points are rank-deficient (coincident or collinear)."""


class SeedOnGroundError(AnnotationError):
    """A click landed on a ground-classified point; the UI should prompt a re-click."""


class NoSeedError(AnnotationError):
    """No candidate point near the clicked location."""


class DegenerateClusterError(AnnotationError):
    """Cluster too small or too thin to fit a rectangle; fall back to a manual box."""


class NotVisibleError(AnnotationError):
    """No cluster point projects into the camera image."""


class TrackLostError(AnnotationError):
    """No points near the predicted center; the track is paused pending manual help."""


class CalibrationError(AnnotationError):
    """Calibration failed its sanity check or does not match the mask/image."""


class UnknownFrameError(AnnotationError, LookupError):
    """A frame id that is not part of the sequence."""
