class AssemblyError(Exception):
    """Base class for errors raised by this package."""


class InfeasibleError(AssemblyError):
    """The optimization (or matching) problem has no feasible point."""


class SearchSpaceError(AssemblyError):
    """A brute-force oracle was asked to enumerate too many candidates."""


class FormatError(AssemblyError, ValueError):
    """Malformed input file or sequence."""
