"""Exception hierarchy shared across the package."""


class SknaError(Exception):
    """Base class for all sknakit errors."""


class InvalidConfigError(SknaError, ValueError):
    """A configuration value is out of its allowed range."""


class InvalidBandError(SknaError, ValueError):
    """Requested frequency band is empty or outside Nyquist."""


class LengthError(SknaError, ValueError):
    """Input signal is too short for the requested operation."""


class ShapeError(SknaError, ValueError):
    """Array shapes or axes do not line up."""


class UndefinedBandError(SknaError, ValueError):
    """Energy band is undefined (zero total power in the search band)."""


class NotFoundError(SknaError, KeyError):
    """A requested phase, subject, or artifact does not exist."""


class StratificationError(SknaError, ValueError):
    """A class has too few samples for the requested stratified split."""


class FileFormatError(SknaError, ValueError):
    """Base class for on-disk artifact parse failures."""


class BadMagicError(FileFormatError):
    """File does not start with the expected magic number."""


class BadVersionError(FileFormatError):
    """File carries an unsupported format version."""


class TruncatedPayloadError(FileFormatError):
    """File ends before the declared payload is complete."""


class ChecksumMismatchError(FileFormatError):
    """Payload CRC32 does not match the stored checksum."""
