"""Exception types shared across the codec."""


class MacodecError(Exception):
    """Base class for all macodec errors."""


class FormatError(MacodecError, ValueError):
    """A serialized container is malformed (bad magic, version, or layout)."""


class ChecksumError(FormatError):
    """A container's CRC-32 does not match its payload."""


class CorruptStreamError(FormatError):
    """An arithmetic bitstream decoded to an impossible state."""


class StreamExhaustedError(CorruptStreamError):
    """The decoder ran out of bytes before all symbols were recovered."""


class ArmDivergenceError(MacodecError, AssertionError):
    """The baseline and model coding arms disagreed where they must not."""
