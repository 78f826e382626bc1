"""Exception hierarchy shared by all infoclip modules."""


class InfoClipError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(InfoClipError, ValueError):
    """Operand shapes do not conform."""


class InputError(InfoClipError, ValueError):
    """An input violates a documented precondition (asymmetry, non-finite values, ...)."""


class DegenerateInputError(InfoClipError, ValueError):
    """The input is well-formed but yields an undefined quantity (zero trace, zero row)."""


class UnsupportedError(InfoClipError, ValueError):
    """A requested option is outside the supported domain (e.g. alpha == 1)."""


class ConvergenceError(InfoClipError, ArithmeticError):
    """An iterative routine hit its cap, or a training run diverged."""


class FormatError(InfoClipError):
    """Malformed tensor or config file.

    ``offset`` is the byte offset (tensor files) or 1-based line number
    (config files) where the problem was detected.
    """

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


class ConfigError(FormatError):
    """Invalid run configuration."""
