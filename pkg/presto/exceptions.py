"""Exceptions for the presto package."""


class PrestoException(Exception):
    """Base exception for presto."""


class FormatError(PrestoException):
    """Exception raised when an input file does not follow its format."""


class DataError(PrestoException):
    """Exception raised when input values are invalid (NaN, Inf)."""

    def __init__(self, message: str, row: int | None = None, col: int | None = None) -> None:
        """Initialize the exception."""
        super().__init__(message)
        self.row = row
        self.col = col


class ManifestError(PrestoException):
    """Exception raised when a multiverse manifest is invalid."""

    def __init__(self, message: str, universe_id: str | None = None) -> None:
        """Initialize the exception."""
        super().__init__(message)
        self.universe_id = universe_id


class IoError(PrestoException):
    """Exception raised when an artifact cannot be read or written."""


class DomainError(PrestoException):
    """Exception raised when arguments fall outside an operation's domain."""


class DegenerateError(PrestoException):
    """Exception raised when input is too degenerate to measure (zero diameter, zero variance)."""


class StateError(PrestoException):
    """Exception raised when an object is in the wrong state for an operation."""


class UnsupportedDimension(PrestoException):
    """Exception raised when an alpha complex is requested above three dimensions."""


class ProvenanceError(PrestoException):
    """Exception raised when landscapes of incompatible pipelines are combined."""


class ConsistencyError(PrestoException):
    """Exception raised when an internal invariant does not hold."""


class UniverseError(PrestoException):
    """Exception raised when the pipeline fails for one universe."""

    def __init__(self, message: str, universe_id: str) -> None:
        """Initialize the exception."""
        super().__init__(f"[{universe_id}] {message}")
        self.universe_id = universe_id
