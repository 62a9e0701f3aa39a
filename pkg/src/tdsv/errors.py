"""Exception types raised across the package."""


class TdsvError(Exception):
    """Base class for all package errors."""


class WavFormatError(TdsvError):
    """The file is not a well-formed RIFF/WAVE container."""


class UnsupportedAudioError(TdsvError):
    """Well-formed WAV whose encoding or channel layout is not supported."""


class ClipTooShortError(TdsvError, ValueError):
    pass


class DimensionMismatchError(TdsvError, ValueError):
    pass


class ZeroNormError(TdsvError, ValueError):
    pass


class DegenerateCohortError(TdsvError, ValueError):
    """Cohort subset too small or with zero variance."""


class MissingInputError(TdsvError, ValueError):
    """A side input (posteriors, parameters, ids) required by the request is absent."""


class FileFormatError(TdsvError, ValueError):
    """Binary or text container that cannot be parsed."""
