"""Exception taxonomy for quadlab engines.

Every failure mode that a caller can act on gets its own class; generic
ValueError/RuntimeError are reserved for programming errors.
"""


class QuadlabError(Exception):
    """Base class for all engine errors."""


class ParameterOutOfRange(QuadlabError):
    """Parameter a outside the real family window [-1/4, 2]."""


class NotDefined(QuadlabError):
    """A requested object does not exist at this parameter (e.g. no
    orientation-reversing fixed point for a < 3/4)."""


class NonHyperbolicBoundary(QuadlabError):
    """The orientation-reversing fixed point has multiplier exactly -1
    (a = 3/4); the return-map tower cannot start there."""


class EscapedInterval(QuadlabError):
    """An iterate left the invariant interval by more than tolerance;
    indicates precision loss, not dynamics."""


class PrecisionExhausted(QuadlabError):
    """Adaptive precision would exceed the configured maximum."""


class BracketInvalid(QuadlabError):
    """Root-solve bracket does not straddle the target."""


class DomainError(QuadlabError):
    """Arguments outside the mathematical domain of a bound or estimate."""


class BudgetExceeded(QuadlabError):
    """An iteration/work budget ran out before the answer was determined."""


class RegularParameter(QuadlabError):
    """The critical orbit is (numerically) attracted to a cycle; nest
    construction does not apply. Carries the cycle period and multiplier
    when the detector certified them."""

    def __init__(self, message=None, period=None, multiplier=None):
        self.period = period
        self.multiplier = multiplier
        super().__init__(message or "critical orbit attracted to a cycle")


class RenormalizationSuspected(QuadlabError):
    """Nest construction stalled in a pattern consistent with a restrictive
    interval of some period; carries the suspected period."""

    def __init__(self, period, message=None):
        self.period = period
        super().__init__(message or f"suspected restrictive interval of period {period}")


class NeverReturnsWithinBudget(BudgetExceeded):
    """A point's forward orbit did not re-enter the reference interval
    within the iteration budget."""


class LandsOnBoundary(QuadlabError):
    """An orbit lands on the boundary of a reference interval within
    tolerance; the combinatorial item is reported as degenerate, never
    perturbed."""


class CentralImmediately(QuadlabError):
    """The point already sits in the central return domain, so its landing
    address is empty and the landing time is zero."""


class LevelMissing(QuadlabError):
    """The requested nest level has not been built."""


class InsufficientLevels(QuadlabError):
    """An observable needs deeper nest structure than was computed."""


class PreperiodNotFoundWithinBudget(BudgetExceeded):
    """Boundary orbit did not reach the reference periodic point within the
    depth budget; no partition can be certified."""


class NotRenormalizable(QuadlabError):
    """Confirmation of a restrictive interval failed."""


class CombinatoricsUnstable(QuadlabError):
    """A parameter probe's combinatorial signature did not match the base
    parameter where it was required to."""


class InsufficientWindows(QuadlabError):
    """Fewer parameter windows were located than requested."""


class MissingData(QuadlabError):
    """A derived report was asked for inputs that were never computed."""


class CorruptCacheEntry(QuadlabError):
    """Cache payload failed its checksum; treated as a miss by callers."""


class MalformedDocument(QuadlabError):
    """A serialized artifact does not follow its documented grammar."""
