"""Exception hierarchy shared by all graphprune modules."""


class GraphPruneError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(GraphPruneError, ValueError):
    """A value passed to an operation is outside its domain."""


class InvalidConfigError(GraphPruneError, ValueError):
    """A configuration object violates its invariants."""


class EmptyInputError(GraphPruneError, ValueError):
    """An operation that requires data received an empty input."""


class InsufficientPointsError(GraphPruneError, ValueError):
    """Too few points for the requested neighbour count."""


class ParseError(GraphPruneError):
    """A file could not be parsed; carries the offending location."""

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = path
        self.line = line
        loc = ""
        if path is not None:
            loc += f"{path}"
        if line is not None:
            loc += f":{line}"
        super().__init__(f"{loc}: {message}" if loc else message)


class SchemaError(GraphPruneError):
    """A file parsed but its contents violate the declared schema."""


class ValidationError(GraphPruneError):
    """Loaded or combined data fails a structural invariant."""


class CorruptionError(GraphPruneError):
    """Internally inconsistent data that points at an upstream bug."""


class WrongFrameError(CorruptionError):
    """A 3D point does not lie in the plane of its provenance frame."""
