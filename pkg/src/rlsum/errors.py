"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates an operation's precondition."""


class StateError(RuntimeError):
    """An object is used in a state that does not allow the operation."""


class ConfigError(ValueError):
    """A configuration is inconsistent or names an unknown option."""


class ParseError(ValueError):
    """An input file does not follow its schema."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class NumericalError(ArithmeticError):
    """A loss or parameter became NaN or infinite."""
