"""Exception types raised across the package."""


class ZakOTFSError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(ZakOTFSError, ValueError):
    """A grid, pilot, or modem parameter is out of range."""


class FrameSizeError(ZakOTFSError, ValueError):
    """A sample sequence does not match the frame geometry."""


class SyncNotFoundError(ZakOTFSError):
    """No header correlation peak cleared the detection threshold."""


class EqualizationError(ZakOTFSError, ArithmeticError):
    """The equalizer system could not be solved."""


class ConfigError(ZakOTFSError, ValueError):
    """Experiment configuration failed validation.

    ``field`` holds the dotted path of the offending entry when known.
    """

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class IQFormatError(ZakOTFSError, ValueError):
    """An IQ capture or its sidecar metadata is malformed."""
