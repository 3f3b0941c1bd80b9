"""Exception types shared across the toolkit."""


class MalsigError(Exception):
    """Base class for all toolkit errors."""


class EmptyInput(MalsigError):
    """Raised when a zero-length byte sequence is given where content is required."""


class InvalidConfig(MalsigError):
    """Raised for unusable configuration (filter bank geometry, width policy, ...)."""


class SizeMismatch(MalsigError):
    """Raised when an array's shape disagrees with what an operation expects."""


class InvalidDim(MalsigError):
    """Raised when a projection's output dimension is not strictly smaller than its input."""


class DegenerateColumn(MalsigError):
    """Raised when a training vector cannot be unit-normalized (all zeros)."""


class HeterogeneousLength(MalsigError):
    """Raised when training vectors of different lengths are mixed."""


class InsufficientSamples(MalsigError):
    """Raised when a family has too few members for the requested split."""


class DimensionMismatch(MalsigError):
    """Raised when a descriptor's dimension disagrees with an index or store."""


class EmptyIndex(MalsigError):
    """Raised when querying an index that holds no records."""


class CorruptStore(MalsigError):
    """Raised when a fingerprint store fails its magic, length, or checksum validation."""


class VersionMismatch(MalsigError):
    """Raised when a fingerprint store was written by an unsupported format version."""


class UnknownFormat(MalsigError):
    """Raised when a binary is neither PE (MZ) nor ELF."""


class MalformedLabelsFile(MalsigError):
    """Raised when a labels TSV cannot be parsed."""
