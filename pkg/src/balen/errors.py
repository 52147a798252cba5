"""Exception types shared across the package."""


class BalenError(Exception):
    """Base class for all package errors."""


class InvalidArgument(BalenError, ValueError):
    """An argument violates an operation's precondition."""


class EmptyInput(InvalidArgument):
    """An input that must be nonempty is empty."""


class SingularPrior(BalenError, ArithmeticError):
    """Negative prior exponent applied to a zero-mass class without smoothing."""


class ParseError(BalenError, ValueError):
    """A file failed to parse; carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(BalenError, ValueError):
    """An experiment configuration is invalid."""
