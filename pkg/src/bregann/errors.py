"""Exception types shared across the package."""


class BregannError(Exception):
    """Base class for all package errors."""


class DomainViolation(BregannError):
    """A point or box lies outside the declared domain.

    ``rows`` carries offending row indices when a batch was validated.
    """

    def __init__(self, message, rows=None):
        super().__init__(message)
        self.rows = list(rows) if rows is not None else []


class NotRooted(BregannError):
    """Operation requires a square-rooted divergence."""


class Clipped(BregannError):
    """A distance target is unreachable inside the domain interval.

    ``endpoint`` is the domain endpoint the march ran into; callers that
    grid an interval treat it as the final breakpoint.
    """

    def __init__(self, endpoint):
        super().__init__(f"distance target unreachable before endpoint {endpoint!r}")
        self.endpoint = endpoint


class NonFinite(BregannError):
    """A generator evaluated to a non-finite value."""


class DegenerateInterval(BregannError):
    """Interval too narrow to bisect."""


class EmptyInput(BregannError):
    """An operation that requires at least one point received none."""


class FastPathUnavailable(BregannError):
    """The precomputed fast-path structure was not built for this index."""
