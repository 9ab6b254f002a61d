"""Exception hierarchy shared by all pipelines."""


class CouplingError(Exception):
    """Base class for every error raised by this package."""


class InvalidNameError(CouplingError, ValueError):
    pass


class GranularityError(CouplingError):
    """Raised when a graph of the wrong granularity is passed in."""


class GraphError(CouplingError, ValueError):
    """Raised when a graph would violate its invariants (self-loops, bad weights)."""


class ClassFormatError(CouplingError):
    """Malformed class file. ``offset`` is the byte position of the failure, if known."""

    def __init__(self, message, offset=None, source=None):
        self.offset = offset
        self.source = source
        super().__init__(message)

    def __str__(self):
        msg = self.args[0]
        if self.offset is not None:
            msg = f"{msg} (at byte offset {self.offset})"
        if self.source is not None:
            msg = f"{self.source}: {msg}"
        return msg


class UnsupportedClassVersionError(ClassFormatError):
    def __init__(self, major, ceiling, source=None):
        self.major = major
        self.ceiling = ceiling
        super().__init__(
            f"class file major version {major} exceeds supported ceiling {ceiling}",
            offset=6, source=source,
        )


class TraceParseError(CouplingError, ValueError):
    """A trace record line could not be parsed."""

    def __init__(self, message, lineno=None, source=None):
        self.lineno = lineno
        self.source = source
        super().__init__(message)

    def __str__(self):
        where = ""
        if self.source is not None:
            where = f"{self.source}:"
        if self.lineno is not None:
            where = f"{where}{self.lineno}: "
        elif where:
            where += " "
        return f"{where}{self.args[0]}"


class DegenerateComparisonError(CouplingError):
    """A comparison universe has fewer than two modules."""

    def __init__(self, n):
        self.n = n
        super().__init__(f"degenerate comparison: n={n} < 2")


class ScenarioError(CouplingError, ValueError):
    """Invalid simulator configuration."""
