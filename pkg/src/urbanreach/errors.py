"""Exception hierarchy.

Every error raised deliberately by the library derives from ``UrbanReachError``
and carries the process exit status the CLI reports for it.
"""


class UrbanReachError(Exception):
    exit_code = 2


class UsageError(UrbanReachError):
    """Conflicting or missing command-line flags."""

    exit_code = 1


class ValidationError(UrbanReachError, ValueError):
    """Input data violates a geometry or schema invariant."""

    exit_code = 2


class ParameterError(UrbanReachError, ValueError):
    """A numeric or structural argument is out of its allowed range."""

    exit_code = 2


class WrongKindError(ParameterError):
    """A standard of the wrong kind was handed to an operation."""


class DegenerateInputError(ParameterError):
    """Too few distinct sites, or all sites collinear."""


class LayerIOError(UrbanReachError, OSError):
    exit_code = 3


class ParseError(ValidationError):
    """Malformed JSON; ``offset`` is the byte position of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class KindMismatchError(ValidationError):
    def __init__(self, message: str, indices):
        self.indices = list(indices)
        super().__init__(f"{message}: feature indices {self.indices}")


class ConfigError(UrbanReachError):
    """Fatal run configuration problem (missing border, unwritable workspace...)."""

    exit_code = 2
