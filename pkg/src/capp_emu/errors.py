class CappError(Exception):
    """Base class for every error raised by capp_emu."""


class ConfigError(CappError, ValueError):
    """Invalid geometry (word width or cell count)."""


class WidthError(CappError, ValueError):
    """A word, mask or tag vector does not fit the configured geometry."""


class ImageError(CappError, ValueError):
    """Malformed memory image."""


class ProtocolError(CappError):
    """The device rejected a command or answered with an unexpected reply.

    ``phase`` names the driver step that failed (for instance
    ``"LOAD_MASK"`` inside a search).
    """

    def __init__(self, message, phase=None):
        super().__init__(message if phase is None else f"{phase}: {message}")
        self.phase = phase


class TransportError(CappError, OSError):
    """The byte channel failed or was closed underneath an operation."""
