"""Exception types shared across the package."""


class ExgError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(ExgError, ValueError):
    """An argument violates an operation's contract."""


class DegenerateInputError(ExgError, ValueError):
    """Input is rank-deficient (e.g. constant channels); the result is undefined."""


class InternalError(ExgError, RuntimeError):
    """An internal consistency check failed. Indicates a bug, not bad input."""


class FrameError(ExgError, ValueError):
    """Base class for acquisition-frame codec errors."""


class BadMagicError(FrameError):
    """The frame does not start with the expected magic bytes."""


class UnknownVersionError(FrameError):
    """The frame declares a protocol version this codec does not speak."""


class UnknownConfigError(FrameError):
    """The frame names a channel configuration id this codec does not know."""


class TruncatedFrameError(FrameError):
    """The buffer ends before the declared payload does."""


class PayloadLengthError(FrameError):
    """The payload length is inconsistent with the header."""


class RecordingFormatError(ExgError, ValueError):
    """A recording or label file does not conform to the documented layout."""
