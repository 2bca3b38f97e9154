"""Exception hierarchy shared by the library and the CLI."""


class OlpError(Exception):
    """Base class for every error raised by olpnet."""

    exit_code = 1


class ArgumentError(OlpError, ValueError):
    """Bad argument: wrong shape, out-of-range value, invalid config."""

    exit_code = 1


class DataFormatError(OlpError):
    """Malformed or truncated data file (IDX magic, payload length, labels)."""

    exit_code = 2


class SingularMatrixError(OlpError, ArithmeticError):
    exit_code = 3


class NumericOverflowError(OlpError, ArithmeticError):
    """Learner state or integrator left the finite/bounded regime."""

    exit_code = 3
