"""
Exception hierarchy for WrenchLab

Every error raised on purpose by the library derives from WrenchLabError.
Most also derive from the built-in category they belong to, so callers that
only know about ValueError/RuntimeError still catch them.
"""


class WrenchLabError(Exception):
    """Base class for all library errors."""


class InputFormatError(WrenchLabError, ValueError):
    """Malformed contact-spec JSON, wrench CSV or problem file."""


class DegenerateNormalError(WrenchLabError, ValueError):
    """A zero-length normal was supplied where a direction is required."""

    def __init__(self, message: str = "degenerate normal"):
        super().__init__(message)


class DegenerateHullError(WrenchLabError, ValueError):
    """The convex hull is lower-dimensional (zero volume)."""

    def __init__(self, message: str = "degenerate hull"):
        super().__init__(message)


class IterationLimitError(WrenchLabError, RuntimeError):
    """The simplex method exceeded its pivot budget."""

    def __init__(self, message: str = "iteration limit"):
        super().__init__(message)


class DegenerateBasisError(WrenchLabError, RuntimeError):
    """LP sensitivity requested at a degenerate optimal basis."""

    def __init__(self, message: str = "degenerate — gradient undefined"):
        super().__init__(message)


class NotForceClosureError(WrenchLabError, ValueError):
    """An operation that needs 0 inside the wrench hull got a set without it."""

    def __init__(self, message: str = "no inscribed ball"):
        super().__init__(message)


class CertificateViolationError(WrenchLabError, RuntimeError):
    """A tolerance certificate claimed closure that the membership LP denies."""


class SingularPointError(WrenchLabError, ValueError):
    """The implicit function has a vanishing gradient at the query point."""

    def __init__(self, message: str = "singular point"):
        super().__init__(message)


class OrientationError(WrenchLabError, ValueError):
    """A polygon was given in clockwise order."""


class SampleRejectionError(WrenchLabError, RuntimeError):
    """A rejection sampler ran out of attempts."""
