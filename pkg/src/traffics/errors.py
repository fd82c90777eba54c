"""Exception types shared across the package."""


class TrafficError(Exception):
    """Base class for library errors."""


class GuardError(TrafficError):
    """A size guard was exceeded."""


class DomainError(TrafficError, ValueError):
    """A parameter lies outside its mathematical domain."""


class ContractError(TrafficError, ValueError):
    """An input violates a documented precondition."""


class TruncationError(TrafficError):
    """A finite-depth network is too shallow for the requested count."""


class ParseError(TrafficError, ValueError):
    """Malformed DSL or config, with an optional source position."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(f"{message}{where}")
