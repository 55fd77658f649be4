"""Error taxonomy shared across the package."""


class AbafError(Exception):
    """Base class for all package errors."""


class WavFormatError(AbafError, ValueError):
    """Raised when a WAV file cannot be parsed.

    ``field`` names the header field (or structural element) that failed,
    so callers can distinguish a truncated RIFF magic from, say, an
    unsupported codec without string matching.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class ManifestError(AbafError, ValueError):
    """Raised on malformed corpus manifests. ``field`` names the offender."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class VadError(AbafError, ValueError):
    """Raised when endpoint detection leaves nothing usable in a clip."""


class CheckpointError(AbafError, ValueError):
    """Raised when a checkpoint cannot be parsed or does not match the model."""
