"""Exception types shared across the package."""


class RtopError(Exception):
    """Base class for all package errors."""


class MalformedPayloadError(RtopError):
    """Payload violates its structural contract (shape, range, sample count)."""


class FocusOutOfBoundsError(RtopError):
    """Requested focus square does not lie within the source raster."""


class UnknownNodeError(RtopError, KeyError):
    """NodeId does not resolve to a stored node."""


class DanglingReferenceError(RtopError):
    """Deletion would orphan a reference held by a surviving path or group."""


class NonMonotonicTickError(RtopError):
    """Trace ticks must strictly increase."""


class UnplayableAudioError(RtopError):
    """Audio payload has no waveform to operate on."""


class ScriptError(RtopError):
    """Stimulus script line could not be parsed or resolved."""


class OfflineError(RtopError):
    """Operation rejected while the generalization pass holds the KB."""
