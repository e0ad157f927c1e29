"""Exception types.

Everything derives from SchwarzError so callers (and the CLI) can separate
input validation problems from genuine bugs.
"""


class SchwarzError(Exception):
    """Base class for all validation errors raised by this package."""


class TangentIntersection(SchwarzError):
    """Two circles touch (penetration depth within tolerance of zero)."""


class Disconnected(SchwarzError):
    """The adjacency graph of the subdomains is not connected."""


class NoIntersection(SchwarzError):
    """No pair of subdomains intersects."""


class DegenerateArc(SchwarzError):
    """A boundary piece is narrower than the angular tolerance."""


class ZeroDenominator(SchwarzError):
    """A partition-of-unity weight was requested at an uncovered point."""


class TooCloseToBoundary(SchwarzError):
    """Poisson evaluation requested too close to the circle."""


class MissingSkeletonData(SchwarzError):
    """A skeleton field does not provide a block that is needed."""


class NoExteriorBoundary(SchwarzError):
    """Dirichlet data cannot be imposed because no exterior arc exists."""


class InsufficientIterations(SchwarzError):
    """Not enough iterates to fit a contraction factor."""


class NoBoundaryNode(SchwarzError):
    """Layer peeling found a nonempty active set without an exposed vertex."""


class UnknownElement(SchwarzError):
    """Element symbol missing from the radii table and no override given."""


class InvalidSpec(SchwarzError):
    """Generator parameters violate their constraints."""


class ParseError(SchwarzError):
    """Malformed input text; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
