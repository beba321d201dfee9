"""First-return tower construction for the quadratic interval family.

The tower over a parameter is built by interleaving two primitives: a
forward scan of the critical orbit that locates first-return times, and
a closed-form square-root pullback that carries interval endpoints
backward along the orbit's sign itinerary. Pullbacks are
self-correcting (errors contract going backward through an expanding
orbit segment), so the only precision hazards are bracket collapse and
marginal comparisons, both of which trigger a restart of the whole
construction at doubled precision. Everything is rebuilt from scratch
at the new precision so results do not depend on the escalation path.

Boundary orbits of the tower intervals are certified to stay outside
the open intervals they bound ("niceness") by streaming the trail of
endpoint images during the pullback itself. Each certificate covers
only the fresh trail of its level; the spliced tail is the previous
level's boundary orbit, whose certificate already bounds it further
out, so the check is complete by induction down to the fixed point.

Return branches are discovered lazily and keyed by their sign
itinerary. Indices are assigned in discovery order per side (positive
domain, positive index); index 0 always means the central branch. The
magnitude of a nonzero index carries no positional meaning.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import gmpy2

from .core import exp2, family, hp, QuadraticMap
from .errors import (
    BracketInvalid,
    BudgetExceeded,
    CentralImmediately,
    DomainError,
    LandsOnBoundary,
    LevelMissing,
    NeverReturnsWithinBudget,
    NonHyperbolicBoundary,
    NotDefined,
    NotRenormalizable,
    PrecisionExhausted,
    PreperiodNotFoundWithinBudget,
    RegularParameter,
    RenormalizationSuspected,
)

mpfr = gmpy2.mpfr


@dataclass(frozen=True)
class NestBudgets:
    """Resource caps for tower construction and the query operations.

    return_steps caps every forward scan (first returns, landings).
    central_run_limit is the number of consecutive central returns
    after which a restrictive interval is suspected and construction
    aborts. precision_start/precision_max bound the escalation ladder.
    """

    return_steps: int = 1_000_000
    central_run_limit: int = 12
    niceness_factor: int = 10
    precision_start: int = 256
    precision_max: int = 1 << 16
    markov_node_limit: int = 1 << 16
    regular_transient: int = 4_096
    regular_period_limit: int = 64
    renorm_grid: int = 4_096


@dataclass(frozen=True)
class NicenessCertificate:
    """Finite check that a level boundary's forward orbit avoids the
    open interval it bounds.

    checked_steps is the length of the fresh trail verified directly;
    margin is min |trail value| minus the radius (nonnegative up to the
    resolution floor when verified). inherited marks that the trail's
    tail is covered by the certificate one level up the tower, which
    bounds it outside a strictly larger interval.
    """

    checked_steps: int
    margin: mpfr
    verified: bool
    inherited: bool


@dataclass(frozen=True)
class NiceInterval:
    """A symmetric tower interval with its boundary certificate."""

    level: int
    lower: mpfr
    upper: mpfr
    boundary_certificate: Optional[NicenessCertificate]

    @property
    def radius(self) -> mpfr:
        return self.upper

    def holds(self, x) -> bool:
        return self.lower <= x <= self.upper


@dataclass(frozen=True)
class ReturnBranch:
    """One monotone (or central, folding) branch of a first-return map.

    The domain maps over the level interval after return_time steps;
    non-central branches do so homeomorphically, the central branch is
    an even double cover. orientation is +1/-1 for non-central
    branches and is fixed at +1 for the central one, where it refers to
    the right half.
    """

    level: int
    index: int
    domain: tuple[mpfr, mpfr]
    return_time: int
    orientation: int
    folding: bool


@dataclass(frozen=True)
class LandingAddress:
    """Itinerary of return branches a point rides before entering the
    central domain, with the pullback domains that itinerary defines.

    domain is the component mapping onto the central domain after
    landing_time steps; enclosing_domain is the component mapping onto
    the whole level interval. An empty address means the point already
    sits in the central domain.
    """

    level: int
    address: tuple[int, ...]
    domain: tuple[mpfr, mpfr]
    enclosing_domain: tuple[mpfr, mpfr]
    landing_time: int


@dataclass(frozen=True)
class GapeInterval:
    """Symmetric enlargement of a tower interval obtained by pulling
    the enclosing landing domain one level up through the central
    branch. Branch domains of the intermediate level are either inside
    it or disjoint from it; branch_relations records which, for every
    branch discovered so far."""

    level: int
    lower: mpfr
    upper: mpfr
    branch_relations: tuple[tuple[int, str], ...]


@dataclass
class NestLevel:
    """Per-level record: the interval, the critical first-return data,
    and the lazily populated branch registry."""

    interval: NiceInterval
    v: Optional[int] = None
    tau: Optional[int] = None
    central: Optional[bool] = None
    critical_point: Optional[mpfr] = None
    critical_address: Optional[tuple[int, ...]] = None
    landing_steps: Optional[int] = None
    gape: Optional[tuple[mpfr, mpfr]] = None
    _registry: dict = field(default_factory=dict, repr=False)
    _branches: dict = field(default_factory=dict, repr=False)
    _side_counts: dict = field(default_factory=dict, repr=False)
    _branch_times: dict = field(default_factory=dict, repr=False)

    @property
    def radius(self) -> mpfr:
        return self.interval.upper


@dataclass
class PrincipalNest:
    """The tower of nested return domains over one parameter.

    Interval data is fixed after construction; the branch tables grow
    lazily and are insert-only, so concurrent readers are safe.
    """

    map: QuadraticMap
    budgets: NestBudgets
    levels: list[NestLevel]
    _orbit_signs: bytearray = field(repr=False, default_factory=bytearray)

    @property
    def parameter(self) -> mpfr:
        return self.map.a

    @property
    def precision(self) -> int:
        return self.map.precision

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def level(self, n: int) -> NestLevel:
        if not 0 <= n <= self.depth:
            raise LevelMissing(f"level {n} not built (depth {self.depth})")
        return self.levels[n]

    def radius(self, n: int) -> mpfr:
        return self.level(n).radius

    def scaling_ratio(self, n: int) -> mpfr:
        """|I_{n+1}| / |I_n|, the per-level contraction factor."""
        if not 0 <= n < self.depth:
            raise LevelMissing(f"ratio needs levels {n} and {n + 1}")
        return self.map.ctx.div(self.levels[n + 1].radius,
                                self.levels[n].radius)

    @property
    def return_times(self) -> list[Optional[int]]:
        return [lv.v for lv in self.levels]

    def branch_return_time(self, n: int, index: int) -> int:
        """Return time of a discovered branch, by index. The central
        branch's time is the level's critical return time."""
        lv = self.level(n)
        if index == 0:
            if lv.v is None:
                raise LevelMissing(f"return time unknown at level {n}")
            return lv.v
        r = lv._branch_times.get(index)
        if r is None:
            raise LevelMissing(
                f"branch {index} at level {n} not discovered yet")
        return r

    @property
    def gape_intervals(self) -> dict[int, tuple[mpfr, mpfr]]:
        return {n: lv.gape for n, lv in enumerate(self.levels)
                if lv.gape is not None}


class _Escalate(Exception):
    """Internal: restart the construction at doubled precision."""


# ---------------------------------------------------------------------------
# pullback primitives


def _sqrt_preimage(m: QuadraticMap, lo, hi, sign, raise_escalate):
    """Preimage of [lo, hi] on the branch of the given sign.

    A lower endpoint above the critical value has no preimage; that
    cannot happen along a correct first-return chain (it would force
    the critical point onto the chain boundary, contradicting the
    minimality of the scanned return time), so a clean violation is a
    construction bug and a marginal one is a precision problem.
    """
    ctx = m.ctx
    alo = ctx.sub(m.a, hi)
    ahi = ctx.sub(m.a, lo)
    if alo < 0:
        if ctx.abs(alo) <= m.escape_tolerance():
            raise_escalate("pullback endpoint crossed the critical value")
        raise BracketInvalid("pullback endpoint above the critical value; "
                             "the return-time scan it came from is broken")
    rlo = ctx.sqrt(alo)
    rhi = ctx.sqrt(ahi)
    if sign > 0:
        return rlo, rhi
    return ctx.minus(rhi), ctx.minus(rlo)


def _pull_interval(m: QuadraticMap, lo, hi, trail, raise_escalate):
    """Pull [lo, hi] back along a sign trail (most recent step last).

    Collapse of the bracket below the resolution floor means the result
    would carry no significant width, so it escalates.
    """
    ctx = m.ctx
    tol = m.escape_tolerance()
    for byte in reversed(trail):
        sign = 1 if byte else -1
        lo, hi = _sqrt_preimage(m, lo, hi, sign, raise_escalate)
        if ctx.sub(hi, lo) <= tol:
            raise_escalate("pullback bracket collapsed below the "
                           "resolution floor")
    return lo, hi


def _fold_radius(m: QuadraticMap, lo, hi, raise_escalate):
    """Radius of the symmetric preimage of [lo, hi] under the full
    parabola: the central component [-s, s] with s^2 = a - lo."""
    ctx = m.ctx
    tol = m.escape_tolerance()
    if m.a < lo or m.a > hi:
        # the critical value must sit inside; the chain tracked its orbit
        if min(ctx.abs(ctx.sub(m.a, lo)), ctx.abs(ctx.sub(m.a, hi))) <= tol:
            raise_escalate("critical value on the pullback boundary")
        raise BracketInvalid("critical value outside the folded bracket")
    rad2 = ctx.sub(m.a, lo)
    if rad2 <= 0:
        raise_escalate("folded bracket degenerate")
    return ctx.sqrt(rad2)


def _trail_flags(signs, v: int) -> list[bool]:
    """flags[k] (1-based, 1 <= k < v): the boundary-orbit trail passes
    through the lower endpoint of the k-th pullback interval. The fold
    image starts at the lower endpoint; a positive-side (decreasing)
    step swaps ends, a negative-side step keeps them."""
    flags = [False] * max(v, 2)
    flags[1] = True
    for k in range(1, v - 1):
        flags[k + 1] = (not flags[k]) if signs[k - 1] else flags[k]
    return flags


def _critical_pullback(m: QuadraticMap, radius, v: int, signs,
                       raise_escalate):
    """Pull [-radius, radius] back along the critical orbit's first v
    steps and fold. Returns the new radius and the minimum |value| on
    the boundary-orbit trail (streamed, nothing stored)."""
    ctx = m.ctx
    tol = m.escape_tolerance()
    flags = _trail_flags(signs, v)
    lo, hi = ctx.minus(radius), radius
    min_clear = None
    for k in range(v - 1, 0, -1):
        sign = 1 if signs[k - 1] else -1
        lo, hi = _sqrt_preimage(m, lo, hi, sign, raise_escalate)
        if ctx.sub(hi, lo) <= tol:
            raise_escalate("pullback bracket collapsed below the "
                           "resolution floor")
        trail_value = lo if flags[k] else hi
        mag = ctx.abs(trail_value)
        if min_clear is None or mag < min_clear:
            min_clear = mag
    s = _fold_radius(m, lo, hi, raise_escalate)
    if min_clear is None:  # v == 1: no monotone steps, trail is empty
        min_clear = radius
    return s, min_clear


# ---------------------------------------------------------------------------
# attracting-cycle probe


def _attracting_cycle_probe(m: QuadraticMap, budgets: NestBudgets):
    """(period, multiplier) if the critical orbit is captured by a
    certified attracting cycle within budget, else None.

    Detection is loose (trailing-window near-periodicity) and the
    certificate is strict: a Newton-polished periodic point whose
    multiplier is below 1 by a fixed margin. Parabolic and barely
    attracting cycles fail certification and fall through to the tower,
    where they surface as renormalization suspicion or budget
    exhaustion instead.
    """
    ctx = m.ctx
    tol = m.escape_tolerance()
    x = hp(0, m.precision)
    for k in range(1, budgets.regular_transient + 1):
        x = m.step(x)
        if x == 0:
            return k, hp(0, m.precision)
        if not m.contains(x, tol):
            raise _Escalate("orbit left the invariant interval")
    limit = budgets.regular_period_limit
    window = []
    for k in range(3 * limit + 16):
        x = m.step(x)
        if x == 0:
            return budgets.regular_transient + k + 1, hp(0, m.precision)
        if not m.contains(x, tol):
            raise _Escalate("orbit left the invariant interval")
        window.append(x)
    loose = ctx.mul(exp2(-12), m.interval_length)
    for q in range(1, limit + 1):
        dev = max(ctx.abs(ctx.sub(window[i], window[i - q]))
                  for i in range(len(window) - limit, len(window)))
        if dev >= loose:
            continue
        certified = _certify_cycle(m, window[-1], q)
        if certified is not None:
            return q, certified
    return None


def _certify_cycle(m: QuadraticMap, z, q: int):
    """Newton-polish a candidate period-q point and return its
    multiplier when it certifies as attracting, else None."""
    ctx = m.ctx
    tol = m.escape_tolerance()
    one = hp(1, m.precision)
    for _ in range(80):
        y = z
        deriv = one
        for _ in range(q):
            deriv = ctx.mul(deriv, m.derivative(y))
            y = m.step(y)
        g = ctx.sub(y, z)
        gp = ctx.sub(deriv, one)
        if ctx.abs(g) <= tol:
            if ctx.abs(deriv) <= ctx.sub(one, exp2(-10)):
                return deriv
            return None
        if gp == 0 or not m.contains(z, ctx.mul(tol, hp(1 << 10,
                                                        m.precision))):
            return None
        z = ctx.sub(z, ctx.div(g, gp))
    return None


# ---------------------------------------------------------------------------
# construction


def build_principal_nest(a, max_level: int,
                         budgets: Optional[NestBudgets] = None
                         ) -> PrincipalNest:
    """Build the first-return tower down to max_level intervals.

    Raises RegularParameter when the critical orbit certifies as
    attracted to a cycle, NonHyperbolicBoundary at a = 3/4 exactly,
    RenormalizationSuspected after a run of consecutive central
    returns, BudgetExceeded when a scan runs out of steps, and
    PrecisionExhausted when the escalation ladder tops out.
    """
    if max_level < 0:
        raise DomainError("max_level must be nonnegative")
    budgets = budgets or NestBudgets()
    precision = budgets.precision_start
    last_reason = None
    while precision <= budgets.precision_max:
        try:
            return _build_at_precision(a, max_level, budgets, precision)
        except _Escalate as exc:
            last_reason = str(exc)
            precision *= 2
    raise PrecisionExhausted(
        f"construction still unstable at {budgets.precision_max} bits"
        + (f" ({last_reason})" if last_reason else ""))


def _raise_escalate(reason):
    raise _Escalate(reason)


def _build_at_precision(a, max_level, budgets, precision) -> PrincipalNest:
    m = family(a, precision)
    ctx = m.ctx
    tol = m.escape_tolerance()
    if ctx.mul(hp(4, precision), m.a) == 3:
        raise NonHyperbolicBoundary("multiplier -1 exactly at a = 3/4")
    probe = _attracting_cycle_probe(m, budgets)
    if probe is not None:
        period, multiplier = probe
        raise RegularParameter(
            f"critical orbit attracted to a period-{period} cycle",
            period=period, multiplier=multiplier)
    if ctx.mul(hp(4, precision), m.a) < 3:
        # below the boundary the preserving fixed point attracts, so the
        # probe fires first; reaching here means it could not certify
        raise NotDefined("no orientation-reversing fixed point below "
                         "a = 3/4 and no certified attracting cycle")

    b0 = m.fixed_point_preserving
    cert0 = NicenessCertificate(checked_steps=0, margin=hp(0, precision),
                                verified=True, inherited=False)
    levels = [NestLevel(interval=NiceInterval(0, ctx.minus(b0), b0, cert0))]

    signs = bytearray()
    x = hp(0, precision)
    m_idx = 0

    def advance():
        nonlocal x, m_idx
        x = m.step(x)
        m_idx += 1
        if x > 0:
            signs.append(1)
        elif x < 0:
            signs.append(0)
        else:
            raise RegularParameter(
                f"critical orbit is exactly periodic with period {m_idx}",
                period=m_idx, multiplier=hp(0, precision))
        if not m.contains(x, tol):
            raise _Escalate("orbit left the invariant interval")

    def scan_to_radius(radius, budget, label):
        # first m with |x_m| <= radius, advancing the shared cursor
        start = m_idx
        while True:
            advance()
            if m_idx - start > budget:
                raise BudgetExceeded(
                    f"no return to {label} within {budget} steps")
            margin = ctx.sub(ctx.abs(x), radius)
            if margin > tol:
                continue
            if ctx.abs(margin) <= tol:
                raise _Escalate(f"orbit point on the boundary of {label}")
            return

    scan_to_radius(b0, budgets.return_steps, "the base interval")
    levels[0].v = m_idx
    levels[0].critical_point = x

    central_run = 0
    for n in range(max_level):
        lv = levels[n]
        v_n = lv.v
        s, min_clear = _critical_pullback(m, lv.radius, v_n, signs,
                                          _raise_escalate)
        margin = ctx.sub(min_clear, s)
        budget_steps = budgets.niceness_factor * max(v_n, 1)
        cert = NicenessCertificate(
            checked_steps=v_n,
            margin=margin,
            verified=bool(v_n <= budget_steps and margin >= ctx.minus(tol)),
            inherited=True)
        levels.append(NestLevel(
            interval=NiceInterval(n + 1, ctx.minus(s), s, cert)))
        nxt = levels[n + 1]

        crit = lv.critical_point
        cmargin = ctx.sub(ctx.abs(crit), s)
        if ctx.abs(cmargin) <= tol:
            raise _Escalate("critical return indistinguishable from the "
                            "new boundary")
        if cmargin < 0:
            lv.tau = 0
            lv.central = True
            lv.critical_address = ()
            lv.landing_steps = 0
            nxt.v = v_n
            nxt.critical_point = crit
            central_run += 1
            if central_run >= budgets.central_run_limit:
                raise RenormalizationSuspected(
                    v_n, f"{central_run} consecutive central returns at "
                         f"return time {v_n}")
            continue

        central_run = 0
        lv.central = False
        if n + 1 < max_level:
            address, landing = _landing_scan_build(
                m, lv, s, budgets, signs, advance,
                lambda: (m_idx, x))
            lv.tau = address[0]
            lv.critical_address = tuple(address)
            lv.landing_steps = landing
            nxt.v = v_n + landing
            nxt.critical_point = x
        else:
            # deepest level: only the branch of the critical return is
            # needed, one hop of the scan
            hop_start = m_idx
            scan_to_radius(lv.radius, budgets.return_steps, "the level")
            r_seg = m_idx - hop_start
            key = (r_seg, bytes(signs[hop_start - 1:m_idx - 1]))
            side = 1 if signs[hop_start - 1] else -1
            lv.tau = _register_branch_key(lv, key, side)

    _fill_gapes(m, levels, signs, tol)
    return PrincipalNest(map=m, budgets=budgets, levels=levels,
                         _orbit_signs=signs)


def _landing_scan_build(m, lv, s, budgets, signs, advance, cursor):
    """Scan the critical value's landing at this level, registering the
    branches it rides. Returns (address indices, total steps)."""
    ctx = m.ctx
    tol = m.escape_tolerance()
    start, x = cursor()
    prev_return = start
    address = []
    while True:
        advance()
        m_idx, x = cursor()
        if m_idx - start > budgets.return_steps:
            raise BudgetExceeded(
                f"critical value did not land in the central domain "
                f"within {budgets.return_steps} steps")
        margin = ctx.sub(ctx.abs(x), lv.radius)
        if margin > tol:
            continue
        if ctx.abs(margin) <= tol:
            raise _Escalate("return point on the level boundary")
        r_seg = m_idx - prev_return
        key = (r_seg, bytes(signs[prev_return - 1:m_idx - 1]))
        side = 1 if signs[prev_return - 1] else -1
        address.append(_register_branch_key(lv, key, side))
        prev_return = m_idx
        inner = ctx.sub(ctx.abs(x), s)
        if ctx.abs(inner) <= tol:
            raise _Escalate("landing point on the central-domain boundary")
        if inner < 0:
            return address, m_idx - start


def _register_branch_key(lv: NestLevel, key, side: int) -> int:
    idx = lv._registry.get(key)
    if idx is None:
        lv._side_counts[side] = lv._side_counts.get(side, 0) + 1
        idx = side * lv._side_counts[side]
        lv._registry[key] = idx
        lv._branch_times[idx] = key[0]
    return idx


def _fill_gapes(m, levels, signs, tol):
    """Pull each level's enclosing landing domain back through the
    central branch two levels up. A central level two up degenerates to
    the whole intermediate interval."""
    ctx = m.ctx
    for t in range(2, len(levels)):
        base = levels[t - 2]
        mid = levels[t - 1]
        if base.central is None:
            continue
        if base.central:
            levels[t].gape = (mid.interval.lower, mid.interval.upper)
            continue
        v_base = base.v
        v_mid = mid.v
        if v_mid is None:
            continue
        # enclosing domain of the critical landing at level t-2: pull the
        # whole interval back along the landing segment of the orbit
        ylo, yhi = _pull_interval(m, base.interval.lower,
                                  base.interval.upper,
                                  signs[v_base - 1:v_mid - 1],
                                  _raise_escalate)
        # then through the central branch: monotone part, then the fold
        zlo, zhi = _pull_interval(m, ylo, yhi, signs[:v_base - 1],
                                  _raise_escalate)
        srad = _fold_radius(m, zlo, zhi, _raise_escalate)
        if (srad < ctx.sub(levels[t].radius, tol)
                or srad > ctx.add(mid.radius, tol)):
            raise BracketInvalid("gape interval escaped its bracket")
        levels[t].gape = (ctx.minus(srad), srad)


# ---------------------------------------------------------------------------
# query operations


def _query_escalate(reason):
    raise PrecisionExhausted(
        f"{reason}; rebuild the tower at higher precision")


def _coerce_point(m: QuadraticMap, x):
    val = mpfr(x, m.precision)
    if not gmpy2.is_finite(val):
        raise DomainError(f"point {x!r} is not finite")
    return val


def _return_scan_query(m, radius, x, budget):
    """First return of x into [-radius, radius]: (steps, trail bytes,
    final point). The trail covers the starting point through the last
    point before return."""
    ctx = m.ctx
    tol = m.escape_tolerance()
    trail = bytearray()
    if ctx.abs(x) <= tol:
        raise LandsOnBoundary("itinerary passes through the critical point")
    trail.append(1 if x > 0 else 0)
    steps = 0
    while True:
        x = m.step(x)
        steps += 1
        if steps > budget:
            raise NeverReturnsWithinBudget(
                f"no return within {budget} steps")
        if not m.contains(x, tol):
            _query_escalate("orbit left the invariant interval")
        margin = ctx.sub(ctx.abs(x), radius)
        if margin > tol:
            if ctx.abs(x) <= tol:
                raise LandsOnBoundary(
                    "itinerary passes through the critical point")
            trail.append(1 if x > 0 else 0)
            continue
        if ctx.abs(margin) <= tol:
            raise LandsOnBoundary(
                "return point indistinguishable from the level boundary")
        return steps, bytes(trail), x


def return_branch_at(nest: PrincipalNest, n: int, x) -> ReturnBranch:
    """The first-return branch whose domain contains x, discovering and
    caching it if needed.

    Needs level n+1 (the central domain) to resolve centrality, so n
    must be strictly less than the tower depth.
    """
    if not 0 <= n < nest.depth:
        raise LevelMissing(
            f"branches at level {n} need level {n + 1}; depth is "
            f"{nest.depth}")
    m = nest.map
    ctx = m.ctx
    tol = m.escape_tolerance()
    lv = nest.levels[n]
    s = nest.levels[n + 1].radius
    x = _coerce_point(m, x)
    bmargin = ctx.sub(ctx.abs(x), lv.radius)
    if bmargin > tol:
        raise DomainError(f"point outside the level-{n} interval")
    if ctx.abs(bmargin) <= tol:
        raise LandsOnBoundary("point on the level boundary")
    cmargin = ctx.sub(ctx.abs(x), s)
    if ctx.abs(cmargin) <= tol:
        raise LandsOnBoundary("point on the central-domain boundary")
    if cmargin < 0:
        branch = lv._branches.get(0)
        if branch is None:
            branch = ReturnBranch(
                level=n, index=0,
                domain=(nest.levels[n + 1].interval.lower, s),
                return_time=lv.v, orientation=1, folding=True)
            lv._branches[0] = branch
        return branch
    r, trail, _ = _return_scan_query(m, lv.radius, x,
                                     nest.budgets.return_steps)
    key = (r, trail)
    side = 1 if trail[0] else -1
    idx = _register_branch_key(lv, key, side)
    branch = lv._branches.get(idx)
    if branch is None:
        lo, hi = _pull_interval(m, lv.interval.lower, lv.interval.upper,
                                trail, _query_escalate)
        neg = sum(1 for byte in trail if not byte)
        orientation = -1 if (r + neg) % 2 else 1
        branch = ReturnBranch(level=n, index=idx, domain=(lo, hi),
                              return_time=r, orientation=orientation,
                              folding=False)
        lv._branches[idx] = branch
    if not branch.domain[0] <= x <= branch.domain[1]:
        raise BracketInvalid("recovered branch domain misses the point")
    return branch


def landing_address(nest: PrincipalNest, n: int, x,
                    require_noncentral: bool = False) -> LandingAddress:
    """Ride first returns at level n until the orbit of x enters the
    central domain; the branch indices visited form the address.

    A point already in the central domain gets the empty address with
    landing time zero, unless require_noncentral is set, in which case
    CentralImmediately is raised for callers that need progress.
    """
    if not 0 <= n < nest.depth:
        raise LevelMissing(
            f"landing at level {n} needs level {n + 1}; depth is "
            f"{nest.depth}")
    m = nest.map
    ctx = m.ctx
    tol = m.escape_tolerance()
    lv = nest.levels[n]
    nxt = nest.levels[n + 1]
    s = nxt.radius
    x = _coerce_point(m, x)
    bmargin = ctx.sub(ctx.abs(x), lv.radius)
    if bmargin > tol:
        raise DomainError(f"point outside the level-{n} interval")
    if ctx.abs(bmargin) <= tol:
        raise LandsOnBoundary("point on the level boundary")
    cmargin = ctx.sub(ctx.abs(x), s)
    if ctx.abs(cmargin) <= tol:
        raise LandsOnBoundary("point on the central-domain boundary")
    if cmargin < 0:
        if require_noncentral:
            raise CentralImmediately(
                "point already sits in the central domain")
        return LandingAddress(
            level=n, address=(),
            domain=(nxt.interval.lower, nxt.interval.upper),
            enclosing_domain=(lv.interval.lower, lv.interval.upper),
            landing_time=0)
    budget = nest.budgets.return_steps
    address = []
    full_trail = bytearray()
    y = x
    spent = 0
    while True:
        r, trail, y = _return_scan_query(m, lv.radius, y, budget - spent)
        spent += r
        full_trail.extend(trail)
        key = (r, trail)
        side = 1 if trail[0] else -1
        address.append(_register_branch_key(lv, key, side))
        inner = ctx.sub(ctx.abs(y), s)
        if ctx.abs(inner) <= tol:
            raise LandsOnBoundary(
                "landing point on the central-domain boundary")
        if inner < 0:
            break
        if spent >= budget:
            raise BudgetExceeded(
                f"no landing within {budget} steps at level {n}")
    lo_c, hi_c = _pull_interval(m, nxt.interval.lower, nxt.interval.upper,
                                full_trail, _query_escalate)
    lo_e, hi_e = _pull_interval(m, lv.interval.lower, lv.interval.upper,
                                full_trail, _query_escalate)
    if not (lo_e <= lo_c and hi_c <= hi_e and lo_c <= x <= hi_c):
        raise BracketInvalid("landing domains failed their nesting check")
    return LandingAddress(level=n, address=tuple(address),
                          domain=(lo_c, hi_c),
                          enclosing_domain=(lo_e, hi_e),
                          landing_time=len(full_trail))


def gape_interval(nest: PrincipalNest, n: int) -> GapeInterval:
    """The stored symmetric enlargement of level n (n >= 2), together
    with inside-or-disjoint relations for the discovered branches one
    level up."""
    if not 2 <= n <= nest.depth:
        raise LevelMissing(f"gape intervals exist for levels 2..{nest.depth}")
    lv = nest.levels[n]
    if lv.gape is None:
        raise LevelMissing(f"gape interval not recorded at level {n}")
    glo, ghi = lv.gape
    ctx = nest.map.ctx
    tol = nest.map.escape_tolerance()
    relations = []
    for idx, branch in sorted(nest.levels[n - 1]._branches.items()):
        if branch.folding:
            relations.append((idx, "inside"))
            continue
        blo, bhi = branch.domain
        if blo >= ctx.sub(glo, tol) and bhi <= ctx.add(ghi, tol):
            relations.append((idx, "inside"))
        elif bhi <= ctx.add(glo, tol) or blo >= ctx.sub(ghi, tol):
            relations.append((idx, "disjoint"))
        else:
            raise BracketInvalid(
                f"branch {idx} straddles the gape boundary at level {n}")
    return GapeInterval(level=n, lower=glo, upper=ghi,
                        branch_relations=tuple(relations))


# ---------------------------------------------------------------------------
# renormalization


@dataclass(frozen=True)
class RenormStatus:
    """Outcome of a restrictive-interval search: not_detected,
    suspected (period only), or confirmed (period and interval)."""

    kind: str
    period: Optional[int] = None
    interval: Optional[tuple[mpfr, mpfr]] = None

    @classmethod
    def not_detected(cls):
        return cls(kind="not_detected")

    @classmethod
    def suspected(cls, period):
        return cls(kind="suspected", period=period)

    @classmethod
    def confirmed(cls, period, interval):
        return cls(kind="confirmed", period=period, interval=interval)


def _interval_step(m: QuadraticMap, lo, hi):
    """Exact image of [lo, hi] under one map step."""
    flo = m.step(lo)
    fhi = m.step(hi)
    if lo <= 0 <= hi:
        return (flo if flo <= fhi else fhi), m.a
    if flo <= fhi:
        return flo, fhi
    return fhi, flo


def _verify_restrictive(m: QuadraticMap, period: int, q) -> bool:
    """[-q, q] is restrictive of the given period: the first period-1
    images avoid its interior and the period-th maps into it."""
    ctx = m.ctx
    tol = m.escape_tolerance()
    lo, hi = ctx.minus(q), q
    for j in range(1, period + 1):
        lo, hi = _interval_step(m, lo, hi)
        if j < period:
            if not (hi <= ctx.add(ctx.minus(q), tol)
                    or lo >= ctx.sub(q, tol)):
                return False
    return (lo >= ctx.sub(ctx.minus(q), tol)
            and hi <= ctx.add(q, tol))


def _restrictive_radius(m: QuadraticMap, period: int,
                        grid: int):
    """Largest q > 0 bounding a verifying restrictive interval of the
    given period, or None.

    Candidate radii are grid-scanned roots of f^period(t) = t and of
    f^period(t) = -t on (0, -beta]. The flipped equation catches
    boundary points that the half-period map sends to their negation,
    which is how doubling combinatorics close up; spurious roots of
    either equation are weeded out by the interval verifier.
    """
    ctx = m.ctx
    tol = m.escape_tolerance()

    def forward(t):
        y = t
        for _ in range(period):
            y = m.step(y)
        return y

    def collect(residual, roots):
        prev_t = ctx.div(m.upper, hp(grid, m.precision))
        prev_r = residual(prev_t)
        for i in range(2, grid + 1):
            t = ctx.div(ctx.mul(m.upper, hp(i, m.precision)),
                        hp(grid, m.precision))
            r = residual(t)
            if (prev_r < 0) != (r < 0) or r == 0:
                u, w = prev_t, t
                fu = prev_r
                while ctx.sub(w, u) > tol:
                    mid = ctx.div(ctx.add(u, w), hp(2, m.precision))
                    fm = residual(mid)
                    if (fu < 0) != (fm < 0):
                        w = mid
                    else:
                        u, fu = mid, fm
                roots.append(ctx.div(ctx.add(u, w), hp(2, m.precision)))
            prev_t, prev_r = t, r

    roots = []
    collect(lambda t: ctx.sub(forward(t), t), roots)
    collect(lambda t: ctx.add(forward(t), t), roots)
    for q in sorted(roots, reverse=True):
        if _verify_restrictive(m, period, q):
            return q
    return None


def _polish_radius(m: QuadraticMap, period: int, q0):
    """Newton-polish a proposed restrictive radius onto the nearby
    boundary root (fixed or negated by the period map) and verify it.
    Returns the sharp radius, or None when no nearby root verifies."""
    ctx = m.ctx
    tol = m.escape_tolerance()
    one = hp(1, m.precision)
    window = ctx.mul(q0, exp2(-6))
    for flip in (False, True):
        z = q0
        polished = None
        for _ in range(80):
            y = z
            d = one
            for _ in range(period):
                d = ctx.mul(d, m.derivative(y))
                y = m.step(y)
            if flip:
                g = ctx.add(y, z)
                gp = ctx.add(d, one)
            else:
                g = ctx.sub(y, z)
                gp = ctx.sub(d, one)
            if ctx.abs(g) <= tol:
                polished = z
                break
            if gp == 0:
                break
            z = ctx.sub(z, ctx.div(g, gp))
            if z <= 0 or ctx.abs(ctx.sub(z, q0)) > window:
                break
        if polished is not None and _verify_restrictive(m, period, polished):
            return polished
    return None


def confirm_restrictive_interval(a, period: int,
                                 budgets: Optional[NestBudgets] = None,
                                 precision: int = 256):
    """Radius of the largest verifying restrictive interval of the
    given period, or None."""
    if period < 2:
        raise DomainError("restrictive intervals have period >= 2")
    budgets = budgets or NestBudgets()
    m = family(a, precision)
    return _restrictive_radius(m, period, budgets.renorm_grid)


def detect_renormalization(a, budgets: Optional[NestBudgets] = None
                           ) -> RenormStatus:
    """Watch tower construction for a run of central returns, then try
    to confirm the suspected restrictive interval.

    Budget exhaustion with no suspicion raised reports not_detected; a
    parameter with a certified attracting cycle of period >= 2 goes
    straight to confirmation of that period. Regular parameters with an
    attracting fixed point re-raise RegularParameter.
    """
    budgets = budgets or NestBudgets()
    candidates = None
    try:
        build_principal_nest(a, budgets.central_run_limit + 16, budgets)
    except RenormalizationSuspected as exc:
        # the stagnating return time is the period of the first return
        # system itself, so it is the only candidate
        candidates = [exc.period]
    except RegularParameter as exc:
        if exc.period is not None and exc.period >= 2:
            # an attracting cycle deep in a cascade sits above a chain of
            # restrictive intervals; the first one has the smallest
            # period dividing the cycle's
            candidates = [d for d in range(2, exc.period + 1)
                          if exc.period % d == 0]
        else:
            raise
    except BudgetExceeded:
        return RenormStatus.not_detected()
    if not candidates:
        return RenormStatus.not_detected()
    m = family(a, budgets.precision_start)
    for period in candidates:
        q = _restrictive_radius(m, period, budgets.renorm_grid)
        if q is not None:
            return RenormStatus.confirmed(period, (m.ctx.minus(q), q))
    return RenormStatus.suspected(candidates[0])


@dataclass(frozen=True)
class RenormalizedMap:
    """The first-return system on a restrictive interval, rescaled to
    [-1, 1]. Evaluation composes base-map steps, so it stays exact at
    the base precision; no polynomial form is constructed."""

    base: QuadraticMap
    period: int
    radius: mpfr

    def evaluate(self, t):
        ctx = self.base.ctx
        x = ctx.mul(self.radius, mpfr(t, self.base.precision))
        for _ in range(self.period):
            x = self.base.step(x)
        return ctx.div(x, self.radius)

    def turning_value(self):
        return self.evaluate(hp(0, self.base.precision))

    def reversing_fixed_point(self, grid: int = 1024):
        """Magnitude of the innermost orientation-reversing fixed point
        of the rescaled map, by grid scan and bisection.

        The rescaled map is even, so a reversing fixed point at -t
        shows up as a root of g(t) + t on (0, 1) with g increasing
        there, and one at +t as a root of g(t) - t with g decreasing.
        Both branches are scanned; the smaller magnitude wins.
        """
        ctx = self.base.ctx
        prec = self.base.precision
        tol = exp2(-(prec // 2))
        h = exp2(-(prec // 4))

        def bisect_roots(residual):
            roots = []
            prev_t = ctx.div(hp(1, prec), hp(grid, prec))
            prev_r = residual(prev_t)
            for i in range(2, grid):
                t = ctx.div(hp(i, prec), hp(grid, prec))
                r = residual(t)
                if (prev_r < 0) != (r < 0):
                    u, w, fu = prev_t, t, prev_r
                    while ctx.sub(w, u) > tol:
                        mid = ctx.div(ctx.add(u, w), hp(2, prec))
                        fm = residual(mid)
                        if (fu < 0) != (fm < 0):
                            w = mid
                        else:
                            u, fu = mid, fm
                    roots.append(ctx.div(ctx.add(u, w), hp(2, prec)))
                prev_t, prev_r = t, r
            return roots

        def slope(t):
            return ctx.sub(self.evaluate(ctx.add(t, h)),
                           self.evaluate(ctx.sub(t, h)))

        candidates = []
        for root in bisect_roots(lambda t: ctx.sub(self.evaluate(t), t)):
            if slope(root) < 0:
                candidates.append(root)
        for root in bisect_roots(lambda t: ctx.add(self.evaluate(t), t)):
            if slope(root) > 0:
                candidates.append(root)
        if not candidates:
            raise NotDefined("the rescaled map has no orientation-"
                             "reversing fixed point")
        return min(candidates)

    def doubling_probe(self) -> bool:
        """True when the rescaled critical orbit makes a period-two
        central return, the signature of one more doubling. A rescaled
        map with no reversing fixed point (the critical point itself is
        fixed, the end of a cascade) probes False."""
        ctx = self.base.ctx
        try:
            rho = self.reversing_fixed_point()
        except NotDefined:
            return False
        t1 = self.turning_value()
        t2 = self.evaluate(t1)
        return ctx.abs(t1) > rho and ctx.abs(t2) <= rho


def renormalize(a, period: int, interval,
                precision: int = 256) -> RenormalizedMap:
    """Verify the proposed restrictive interval and wrap the rescaled
    first-return system. Raises NotRenormalizable when verification
    fails."""
    if period < 2:
        raise NotRenormalizable("restrictive intervals have period >= 2")
    m = family(a, precision)
    ctx = m.ctx
    lo = mpfr(interval[0], precision)
    hi = mpfr(interval[1], precision)
    tol = m.escape_tolerance()
    if hi <= 0 or ctx.abs(ctx.add(lo, hi)) > ctx.mul(hi, exp2(-40)):
        raise NotRenormalizable("restrictive interval must be symmetric "
                                "around the critical point")
    radius = _polish_radius(m, period, hi)
    if radius is None:
        raise NotRenormalizable(
            f"[-q, q] near q = {hi} fails the period-{period} "
            f"restriction checks")
    return RenormalizedMap(base=m, period=period, radius=radius)


# ---------------------------------------------------------------------------
# Markov partitions


@dataclass(frozen=True)
class MarkovPartition:
    """Partition of the invariant interval minus a tower interval into
    pieces bounded by preimages of the preserving fixed point, with the
    transition data of the full map."""

    level: int
    hole: tuple[mpfr, mpfr]
    cuts: tuple[mpfr, ...]
    pieces: tuple[tuple[mpfr, mpfr], ...]
    transitions: tuple[tuple[int, ...], ...]
    covers_hole: tuple[bool, ...]

    @property
    def piece_count(self) -> int:
        return len(self.pieces)


def markov_partition(a, nest: PrincipalNest, n: int,
                     depth_budget: int) -> MarkovPartition:
    """Cut the invariant interval along depth-bounded preimages of the
    positive fixed point that never enter the open level-n interval.

    The level boundary reaches the fixed point after one fold step plus
    the sum of the return times above it, so depth_budget below that
    preperiod cannot contain the boundary and is rejected.
    """
    if not 1 <= n <= nest.depth:
        raise LevelMissing(f"partition needs a built level in 1..{nest.depth}")
    m = nest.map
    ctx = m.ctx
    tol = m.escape_tolerance()
    if ctx.abs(ctx.sub(mpfr(a, m.precision), m.a)) > tol:
        raise DomainError("parameter does not match the supplied tower")
    vs = [nest.levels[i].v for i in range(n)]
    if any(v is None for v in vs):
        raise LevelMissing("return times above the hole are incomplete")
    preperiod = 1 + sum(vs)
    if depth_budget < preperiod:
        raise PreperiodNotFoundWithinBudget(
            f"boundary preperiod is {preperiod}, beyond depth "
            f"{depth_budget}")
    hole_radius = nest.levels[n].radius
    target = m.fixed_point_preserving
    kept = [target]
    frontier = [target]
    total = 1
    for _ in range(depth_budget):
        nxt = []
        for y in frontier:
            r2 = ctx.sub(m.a, y)
            if r2 <= 0:
                continue
            root = ctx.sqrt(r2)
            for x in (root, ctx.minus(root)):
                if ctx.sub(ctx.abs(x), hole_radius) <= ctx.minus(tol):
                    continue  # inside the open hole: prune the subtree
                nxt.append(x)
                kept.append(x)
                total += 1
                if total > nest.budgets.markov_node_limit:
                    raise BudgetExceeded(
                        f"preimage tree exceeded "
                        f"{nest.budgets.markov_node_limit} nodes")
        frontier = nxt
    kept.sort()
    cuts = []
    for x in kept:
        if not cuts or ctx.sub(x, cuts[-1]) > tol:
            cuts.append(x)
    if not any(ctx.abs(ctx.sub(c, hole_radius)) <= tol for c in cuts):
        raise PreperiodNotFoundWithinBudget(
            "level boundary missing from the preimage tree")
    edges = [m.beta] + cuts + [m.upper]
    pieces = []
    for u, w in zip(edges[:-1], edges[1:]):
        if ctx.sub(w, u) <= tol:
            continue
        if (ctx.abs(ctx.add(u, hole_radius)) <= tol
                and ctx.abs(ctx.sub(w, hole_radius)) <= tol):
            continue  # the hole itself
        pieces.append((u, w))
    hole = (nest.levels[n].interval.lower, hole_radius)
    transitions = []
    covers_hole = []
    for u, w in pieces:
        fu, fw = m.step(u), m.step(w)
        img_lo, img_hi = (fu, fw) if fu <= fw else (fw, fu)
        row = tuple(j for j, (pu, pw) in enumerate(pieces)
                    if pu >= ctx.sub(img_lo, tol)
                    and pw <= ctx.add(img_hi, tol))
        transitions.append(row)
        covers_hole.append(bool(hole[0] >= ctx.sub(img_lo, tol)
                                and hole[1] <= ctx.add(img_hi, tol)))
    return MarkovPartition(level=n, hole=hole, cuts=tuple(cuts),
                           pieces=tuple(pieces),
                           transitions=tuple(transitions),
                           covers_hole=tuple(covers_hole))
