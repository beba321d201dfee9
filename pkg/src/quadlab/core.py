"""Arbitrary-precision kernel for the real quadratic family x -> a - x*x.

Everything downstream (return-map towers, statistics, parameter scans) sits
on the primitives here: validated map construction, orbit evaluation with
log-summed derivatives, fixed points, and monotone-branch pullback solving.

All arithmetic on working values goes through explicit gmpy2 contexts.
Python-level operators on mpfr (including unary minus and abs) round through
the 53-bit thread context and must never touch working data; comparisons are
exact and remain fair game.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import gmpy2
from gmpy2 import mpfr

from .errors import (
    BracketInvalid,
    EscapedInterval,
    NonHyperbolicBoundary,
    NotDefined,
    ParameterOutOfRange,
    PrecisionExhausted,
)

MIN_PRECISION = 53
DEFAULT_PRECISION = 256
# Hard ceiling for adaptive escalation; configs may lower it.
DEFAULT_PRECISION_MAX = 1 << 16


def make_context(precision: int) -> gmpy2.context:
    if precision < MIN_PRECISION:
        raise ValueError(f"precision {precision} below minimum {MIN_PRECISION}")
    return gmpy2.context(precision=precision)


def hp(value, precision: int) -> mpfr:
    """Build an mpfr at the stated precision. Strings are preferred for
    exact decimal inputs; floats are accepted and converted exactly."""
    return mpfr(value, precision)


def exp2(k: int) -> mpfr:
    """2^k as an exact mpfr, any integer k within MPFR's exponent range."""
    return gmpy2.exp2(mpfr(k, 64))


def decimal_string(x: mpfr) -> str:
    """Decimal serialization that round-trips bit-exactly at x's precision."""
    if not gmpy2.is_finite(x):
        raise ValueError(f"non-finite value not serializable: {x!r}")
    if x == 0:
        return "0"
    digits, exp, _prec = gmpy2.digits(x, 10, 0)
    sign = "-" if digits.startswith("-") else ""
    mantissa = digits.lstrip("-")
    return f"{sign}0.{mantissa}e{exp}"


def parse_decimal(s: str, precision: int) -> mpfr:
    return mpfr(s, precision)


def compare_with_margin(x: mpfr, y: mpfr, margin: mpfr) -> int:
    """Three-way compare; 0 means indistinguishable within margin.

    Used when values of different precisions meet: the caller passes the
    uncertainty of the lower-precision side.
    """
    ctx = make_context(max(x.precision, y.precision, MIN_PRECISION))
    d = ctx.sub(x, y)
    if ctx.abs(d) <= margin:
        return 0
    return -1 if d < 0 else 1


@dataclass(frozen=True)
class QuadraticMap:
    """One member of the family, pinned to a working precision."""

    a: mpfr
    precision: int
    ctx: gmpy2.context = field(repr=False, compare=False)
    beta: mpfr
    upper: mpfr  # exact negation of beta
    fixed_point_preserving: mpfr  # the positive fixed point (exists for a > -1/4)

    @property
    def lower(self) -> mpfr:
        return self.beta

    @property
    def interval_length(self) -> mpfr:
        return self.ctx.mul(self.upper, hp(2, self.precision))

    def step(self, x: mpfr) -> mpfr:
        return self.ctx.sub(self.a, self.ctx.mul(x, x))

    def derivative(self, x: mpfr) -> mpfr:
        return self.ctx.mul(hp(-2, self.precision), x)

    def contains(self, x: mpfr, slack: mpfr | None = None) -> bool:
        if slack is None:
            return self.beta <= x <= self.upper
        return (self.ctx.sub(self.beta, slack) <= x
                <= self.ctx.add(self.upper, slack))

    def escape_tolerance(self) -> mpfr:
        # 2^(-p/2) * |I|: the engine-wide resolution floor at precision p.
        return self.ctx.mul(exp2(-(self.precision // 2)), self.interval_length)


def family(a, precision: int = DEFAULT_PRECISION) -> QuadraticMap:
    """Validate a and build the map. a may be str, int, float, or mpfr.

    The parameter window is [-1/4, 2]; outside it there is no invariant
    interval and every operation downstream is meaningless.
    """
    if precision < MIN_PRECISION:
        raise ValueError(f"precision {precision} below minimum {MIN_PRECISION}")
    ctx = make_context(precision)
    av = mpfr(a, precision)
    if not gmpy2.is_finite(av):
        raise ParameterOutOfRange(f"a = {av} is not finite")
    # 4a is exact scaling, so these parameter-window compares are exact.
    four_a = ctx.mul(hp(4, precision), av)
    if four_a < -1 or four_a > 8:
        raise ParameterOutOfRange(f"a = {av} outside [-1/4, 2]")
    disc = ctx.sqrt(ctx.add(hp(1, precision), four_a))
    beta = ctx.div(ctx.sub(hp(-1, precision), disc), hp(2, precision))
    p = ctx.div(ctx.add(hp(-1, precision), disc), hp(2, precision))
    m = QuadraticMap(a=av, precision=precision, ctx=ctx, beta=beta,
                     upper=ctx.minus(beta), fixed_point_preserving=p)
    # beta is a fixed point; the computed root must satisfy its equation to
    # within the resolution floor or the construction itself is broken.
    resid = ctx.abs(ctx.sub(m.step(beta), beta))
    if resid > m.escape_tolerance():
        raise ParameterOutOfRange(
            f"fixed-point residual {resid} too large at a = {av}")
    return m


def invariant_interval(a, precision: int = DEFAULT_PRECISION) -> tuple[mpfr, mpfr]:
    """The maximal invariant interval [beta, -beta]."""
    m = family(a, precision)
    return (m.beta, m.upper)


def orientation_reversing_fixed_point(a, precision: int = DEFAULT_PRECISION) -> mpfr:
    """The positive fixed point p with Df(p) < -1; exists only for a > 3/4.

    At a = 3/4 the multiplier is exactly -1 and the point is useless as a
    return-tower seed, so that boundary is reported separately.
    """
    m = family(a, precision)
    four_a = m.ctx.mul(hp(4, precision), m.a)
    if four_a == 3:
        raise NonHyperbolicBoundary("multiplier -1 exactly at a = 3/4")
    if four_a < 3:
        raise NotDefined(f"no orientation-reversing fixed point at a = {m.a}")
    return m.fixed_point_preserving


@dataclass
class OrbitRecord:
    """Forward orbit of x0 with derivative bookkeeping.

    points[k] = f^k(x0) for k = 0..n.
    log_derivative_partial_sums[k] = ln|Df^k(x0)| for k = 0..n, accumulated
    as a sum of ln|2 x_j| terms at working precision, never as a product.
    min_abs / boundary_margin track how close the orbit came to the critical
    point and to the invariant-interval boundary (over k >= 1), which is what
    adaptive-precision callers key escalation on.
    """

    a: mpfr
    x0: mpfr
    precision: int
    points: list[mpfr]
    log_derivative_partial_sums: list[mpfr]
    min_abs: mpfr
    boundary_margin: mpfr

    def point(self, k: int) -> mpfr:
        return self.points[k]

    def log_derivative(self, k: int) -> mpfr:
        return self.log_derivative_partial_sums[k]


def evaluate_orbit(a, x0, n: int, precision: int = DEFAULT_PRECISION,
                   precision_max: int = DEFAULT_PRECISION_MAX) -> OrbitRecord:
    """Evaluate n forward steps. Deterministic: same inputs, same bits.

    Raises EscapedInterval if an iterate leaves [beta, -beta] by more than
    2^(-p/2)*|I|; true orbits of interior points cannot do that, so it
    always means the precision was too low for this orbit length.
    """
    if precision > precision_max:
        raise PrecisionExhausted(
            f"requested {precision} bits > maximum {precision_max}")
    m = family(a, precision)
    ctx = m.ctx
    x = mpfr(x0, precision)
    tol = m.escape_tolerance()
    if not m.contains(x, tol):
        raise EscapedInterval(f"x0 = {x} outside invariant interval")
    two = hp(2, precision)
    points = [x]
    sums = [hp(0, precision)]
    acc = hp(0, precision)
    min_abs = gmpy2.inf()
    margin = gmpy2.inf()
    for _k in range(n):
        acc = ctx.add(acc, ctx.log(ctx.abs(ctx.mul(two, x))))
        x = m.step(x)
        if not m.contains(x, tol):
            raise EscapedInterval(
                f"iterate {_k + 1} escaped to {x} at precision {precision}")
        points.append(x)
        sums.append(acc)
        ax = ctx.abs(x)
        if ax < min_abs:
            min_abs = ax
        bm = ctx.sub(m.upper, ax)
        if bm < margin:
            margin = bm
    return OrbitRecord(a=m.a, x0=points[0], precision=precision, points=points,
                       log_derivative_partial_sums=sums, min_abs=min_abs,
                       boundary_margin=margin)


def iter_orbit(m: QuadraticMap, x0: mpfr) -> Iterator[mpfr]:
    """Infinite forward orbit generator starting at f(x0). No storage; the
    caller owns termination and any escape checks."""
    x = x0
    while True:
        x = m.step(x)
        yield x


@dataclass
class LadderReport:
    """Outcome of the precision-ladder check on one orbit."""

    precision: int
    n: int
    bound_met: bool
    first_violation: int | None
    max_relative_deviation: float


def precision_ladder_report(a, x0, n: int,
                            precision: int = DEFAULT_PRECISION) -> LadderReport:
    """Recompute the orbit at precision+64 and compare.

    The contract: point k may move by at most 2^(-p + 4k) in relative terms.
    The family's derivative never exceeds 2*|I| so error growth per step is
    far below 2^4; a violation therefore indicates a broken kernel rather
    than hard dynamics, and callers treat it as an escalation trigger.
    """
    base = evaluate_orbit(a, x0, n, precision)
    fine = evaluate_orbit(a, x0, n, precision + 64)
    ctx = make_context(precision + 64)
    one = mpfr(1, 64)
    worst = 0.0
    first_bad = None
    for k in range(n + 1):
        ref = fine.points[k]
        aref = ctx.abs(ref)
        scale = aref if aref > one else one
        dev = ctx.div(ctx.abs(ctx.sub(base.points[k], ref)), scale)
        # Powers of two are exact at any precision; comparing in mpfr avoids
        # float underflow for large p.
        allowed = exp2(min(-precision + 4 * k, 64))
        if dev > allowed and first_bad is None:
            first_bad = k
        rel = float(ctx.div(dev, allowed))
        if rel > worst:
            worst = rel
    return LadderReport(precision=precision, n=n, bound_met=first_bad is None,
                        first_violation=first_bad, max_relative_deviation=worst)


def pullback_chain(m: QuadraticMap, signs: Sequence[int], y: mpfr) -> list[mpfr]:
    """Exact branchwise inverse orbit of y through len(signs) map steps.

    signs[j] is the sign of the preimage point at depth j (signs[0] belongs
    to the deepest preimage, the solution of f^len(signs)(x) = y on that
    branch). Returns [x_0, x_1, ..., x_m] with x_m = y and f(x_j) = x_{j+1}.
    Raises BracketInvalid when the branch cannot reach y (a - y < 0).

    Numerically this is the stable direction: fresh rounding errors are
    damped wherever the forward branch expands.
    """
    ctx = m.ctx
    chain = [y]
    cur = y
    for s in reversed(signs):
        rad = ctx.sub(m.a, cur)
        if rad < 0:
            raise BracketInvalid(
                f"target {cur} above critical value {m.a}; branch inverse undefined")
        r = ctx.sqrt(rad)
        cur = r if s > 0 else ctx.minus(r)
        chain.append(cur)
    chain.reverse()
    return chain


def _forward_residual(m: QuadraticMap, x: mpfr, steps: int, target: mpfr):
    """f^steps(x) - target together with (f^steps)'(x)."""
    ctx = m.ctx
    v = x
    deriv = hp(1, m.precision)
    for _ in range(steps):
        deriv = ctx.mul(deriv, m.derivative(v))
        v = m.step(v)
    return ctx.sub(v, target), deriv


def solve_monotone_pullback(a, itinerary: Sequence[int], target, bracket,
                            precision: int = DEFAULT_PRECISION) -> mpfr:
    """Solve f^m(x) = target inside a bracket on a fixed monotone branch.

    itinerary is the sign pattern (+1/-1 per step) of the branch's points;
    it makes f^m injective on the bracket. Bisection owns the bracket; a
    branchwise-inverse seed plus damped Newton steps do the convergence, and
    the iterate never leaves the proven bracket. The result satisfies
    |f^m(x) - target| <= 2^(-p/2)*|I| and is additionally polished until
    Newton stops moving, so it is accurate even where the branch contracts.
    """
    m = family(a, precision)
    ctx = m.ctx
    steps = len(itinerary)
    if steps == 0:
        raise ValueError("empty itinerary")
    lo = mpfr(bracket[0], precision)
    hi = mpfr(bracket[1], precision)
    if not lo < hi:
        raise BracketInvalid(f"bracket [{lo}, {hi}] is not an interval")
    tgt = mpfr(target, precision)
    r_lo, _ = _forward_residual(m, lo, steps, tgt)
    r_hi, _ = _forward_residual(m, hi, steps, tgt)
    if r_lo == 0:
        return lo
    if r_hi == 0:
        return hi
    if (r_lo < 0) == (r_hi < 0):
        raise BracketInvalid(
            f"f^{steps} does not straddle {tgt} on [{lo}, {hi}]")
    tol = m.escape_tolerance()
    width_floor = ctx.mul(exp2(-precision), m.interval_length)
    half = hp("0.5", precision)

    # Seed from the closed-form branch inverse when it lands in the bracket;
    # Newton from there usually finishes immediately.
    try:
        seed = pullback_chain(m, itinerary, tgt)[0]
    except BracketInvalid:
        seed = None
    if seed is not None and lo < seed < hi:
        x = seed
    else:
        x = ctx.mul(ctx.add(lo, hi), half)

    neg_side_lo = r_lo < 0
    for _ in range(4 * precision):
        r, d = _forward_residual(m, x, steps, tgt)
        if ctx.abs(r) <= tol:
            return _newton_polish(m, x, steps, tgt, lo, hi, r, d)
        if (r < 0) == neg_side_lo:
            lo = x
        else:
            hi = x
        if ctx.sub(hi, lo) <= width_floor:
            return ctx.mul(ctx.add(lo, hi), half)
        took_newton = False
        if d != 0 and gmpy2.is_finite(d):
            cand = ctx.sub(x, ctx.div(r, d))
            if lo < cand < hi:
                x = cand
                took_newton = True
        if not took_newton:
            x = ctx.mul(ctx.add(lo, hi), half)
    raise BracketInvalid(
        f"no convergence after {4 * precision} iterations; bracket [{lo}, {hi}]")


def _newton_polish(m: QuadraticMap, x, steps, tgt, lo, hi, r, d):
    """Drive Newton to its noise floor without leaving [lo, hi]."""
    ctx = m.ctx
    last_step = None
    for _ in range(60):
        if r == 0 or d == 0 or not gmpy2.is_finite(d):
            break
        step = ctx.div(r, d)
        astep = ctx.abs(step)
        if last_step is not None and astep >= last_step:
            break
        cand = ctx.sub(x, step)
        if not lo <= cand <= hi:
            break
        x = cand
        last_step = astep
        r, d = _forward_residual(m, x, steps, tgt)
    return x
