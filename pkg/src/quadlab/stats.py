"""Statistical observables over principal nest towers.

Four families of instruments: per-level scalar statistics with growth
diagnostics, Lebesgue-weighted return-time distributions, grid-sampled
expansion profiles of first-return branches, and long-orbit estimators
for the derivative growth rate and the recurrence exponent of the
critical orbit. On top of those sit two combinatorial quality
predicates, one for landing itineraries and one for return branches,
built from explicit density thresholds.

Everything here is an estimator and reports itself as such: infima are
taken over sample grids, weights over the branches a stratified scan
actually resolved, and whatever failed to resolve is dropped from the
sample with the totals recording the loss. Nothing extrapolates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import gmpy2
from gmpy2 import mpfr

from .core import DEFAULT_PRECISION, QuadraticMap, family, hp
from .errors import (
    BudgetExceeded,
    CombinatoricsUnstable,
    DomainError,
    InsufficientLevels,
    LandsOnBoundary,
    LevelMissing,
    MissingData,
    PrecisionExhausted,
    RegularParameter,
)
from .nest import (
    NestBudgets,
    PrincipalNest,
    ReturnBranch,
    _attracting_cycle_probe,
    _Escalate,
    build_principal_nest,
    landing_address,
    return_branch_at,
)
from .qs import IntervalSet, QSParameters, capacity_bound

__all__ = [
    "NestStatistics",
    "TimeDistribution",
    "HyperbolicityProfile",
    "ClassifierConfig",
    "LandingFlags",
    "BranchFlags",
    "ExpansionEstimate",
    "RecurrenceReport",
    "scaling_sequence",
    "critical_statistics",
    "sample_branches",
    "return_time_distribution",
    "hyperbolicity_profile",
    "ce_estimator",
    "recurrence_exponent",
    "branch_itinerary",
    "classify_landing",
    "classify_return_branch",
]


# ---------------------------------------------------------------------------
# per-level scalars


@dataclass(frozen=True)
class NestStatistics:
    """Per-level scalars of one tower, with growth-ratio diagnostics.

    scaling holds the contraction factors |I_{n+1}|/|I_n| at working
    precision; every other field is a float diagnostic. Index n of a
    tuple refers to level n; entries are None where the tower carries
    no data (the unbuilt tail level, an unknown address) or where the
    ratio is not defined yet (logarithms of logarithms need room).

    boundary_offsets is the distance of the critical return point to
    the boundary-or-centre set of its level, normalized by the level
    diameter, so it lives in [0, 1/2]. torrential_ratios compares the
    iterated logarithm of one contraction factor against the plain
    logarithm of the previous one; a sequence staying above 1 is the
    signature of faster-than-exponential decay, and decay_fit is the
    exponential null hypothesis those ratios are judged against.
    """

    parameter: mpfr
    depth: int
    scaling: tuple
    return_times: tuple
    landing_positions: tuple
    central_flags: tuple
    landing_lengths: tuple
    boundary_offsets: tuple
    torrential_ratios: tuple
    landing_growth: tuple
    time_growth: tuple
    recurrence_offsets: tuple
    decay_fit: Optional[tuple]


def _boundary_offset(lv) -> Optional[float]:
    # mpfr quotient first: deep radii underflow doubles, their ratios
    # do not
    if lv.critical_point is None:
        return None
    r = lv.radius
    x = abs(lv.critical_point)
    return float(min(x, r - x) / (2 * r))


def _tower_statistics(nest: PrincipalNest) -> NestStatistics:
    if nest.depth < 1:
        raise InsufficientLevels(
            f"statistics need at least two levels, tower has {nest.depth + 1}")
    levels = nest.levels
    depth = nest.depth

    scaling = tuple(nest.scaling_ratio(n) for n in range(depth))
    logs = [float(-gmpy2.log(s)) for s in scaling]

    v = tuple(lv.v for lv in levels)
    tau = tuple(lv.tau for lv in levels)
    central = tuple(lv.central for lv in levels)
    lengths = tuple(len(lv.critical_address)
                    if lv.critical_address is not None else None
                    for lv in levels)
    offsets = tuple(_boundary_offset(lv) for lv in levels)

    # ln ln (1/c_{n+1}) / ln (1/c_n); the outer log needs its argument
    # above 1, which fails while the contraction is still mild.
    torrential = []
    for n in range(depth - 1):
        nxt = logs[n + 1]
        torrential.append(math.log(nxt) / logs[n] if nxt > 1 else None)
    torrential = tuple(torrential)

    lgrowth = tuple(
        math.log(lengths[n]) / logs[n]
        if lengths[n] is not None and lengths[n] >= 1 and n < depth else None
        for n in range(depth + 1))
    tgrowth = tuple(
        math.log(v[n + 1]) / logs[n]
        if n < depth and v[n + 1] is not None else None
        for n in range(depth + 1))
    recurrence = tuple(
        -math.log(offsets[n]) / math.log(n)
        if n >= 2 and offsets[n] not in (None, 0.0) else None
        for n in range(depth + 1))

    fit = None
    if depth >= 2:
        # least squares of ln c_n against n; reported as (C, rate) with
        # c_n ~ C * rate**n
        xs = list(range(depth))
        ys = [-u for u in logs]
        xm = sum(xs) / depth
        ym = sum(ys) / depth
        den = sum((x - xm) ** 2 for x in xs)
        slope = sum((x - xm) * (y - ym) for x, y in zip(xs, ys)) / den
        fit = (math.exp(ym - slope * xm), math.exp(slope))

    return NestStatistics(
        parameter=nest.parameter,
        depth=depth,
        scaling=scaling,
        return_times=v,
        landing_positions=tau,
        central_flags=central,
        landing_lengths=lengths,
        boundary_offsets=offsets,
        torrential_ratios=torrential,
        landing_growth=lgrowth,
        time_growth=tgrowth,
        recurrence_offsets=recurrence,
        decay_fit=fit,
    )


def scaling_sequence(nest: PrincipalNest) -> NestStatistics:
    """Contraction factors of the tower with decay diagnostics.

    Needs at least two levels. The scaling entries are exact quotients
    of the stored radii; the fit and the torrential ratios are floats.
    """
    return _tower_statistics(nest)


def critical_statistics(nest: PrincipalNest) -> NestStatistics:
    """Critical-orbit statistics of the tower: return times, landing
    positions and lengths, and the normalized distance of each critical
    return point to the boundary-or-centre set, with ratio diagnostics
    against the contraction factors.
    """
    stats = _tower_statistics(nest)
    if all(t is None for t in stats.return_times):
        raise MissingData("tower carries no critical return data")
    return stats


# ---------------------------------------------------------------------------
# stratified branch sampling

_QUERY_LOSSES = (LandsOnBoundary, PrecisionExhausted, BudgetExceeded)


def _stratified_branches(nest: PrincipalNest, n: int, strata: int):
    """Query the return branch at every stratum midpoint of the level
    interval, deduplicated by branch index.

    Strata whose query does not resolve (boundary hits, the precision
    floor, scan budgets) are counted and dropped; callers fold the loss
    into their totals. Returns (branches by index, failed stratum
    count).
    """
    lv = nest.level(n)
    prec = nest.precision
    two_r = lv.radius * 2
    out: dict[int, ReturnBranch] = {}
    failed = 0
    for i in range(strata):
        x = two_r * hp((2 * i + 1) / (2 * strata), prec) - lv.radius
        try:
            br = return_branch_at(nest, n, x)
        except _QUERY_LOSSES:
            failed += 1
            continue
        out.setdefault(br.index, br)
    return out, failed


def sample_branches(nest: PrincipalNest, n: int, strata: int = 200):
    """Stratified survey of the return branches of level n: branches by
    index plus the count of strata whose query did not resolve.

    The survey is deterministic (stratum midpoints), so repeated calls
    agree and the branch indices match the tower's discovery order.
    """
    if not 1 <= n < nest.depth:
        raise LevelMissing(
            f"survey at level {n} needs levels {n} and {n + 1} built")
    if strata < 1:
        raise DomainError("at least one stratum")
    return _stratified_branches(nest, n, strata)


# ---------------------------------------------------------------------------
# return-time distribution


@dataclass(frozen=True)
class TimeDistribution:
    """Lebesgue-weighted histogram of first-return times at one level.

    Weights are |branch domain| / |level interval| for the branches the
    stratified scan resolved, so total_weight <= 1, the gap being made
    of unresolved strata and branches too narrow for the stratification
    to hit. The central folding branch enters the histogram like any
    other; its weight and time are also broken out separately.

    alpha_estimate is the steepest exponential decay rate the sampled
    tail supports: the largest zeta not exceeding the parent
    contraction factor such that tail(k) <= exp(-zeta k) holds at every
    sampled time k >= 1/zeta. concentration is the fraction of sampled
    weight whose time falls inside concentration_window.
    """

    level: int
    histogram: tuple
    branch_count: int
    sampled_strata: int
    failed_strata: int
    total_weight: float
    central_weight: Optional[float]
    central_time: Optional[int]
    epsilon: float
    concentration_window: tuple
    concentration: float
    alpha_estimate: float
    capacity_tail: Optional[tuple] = None

    def tail(self, k: int) -> float:
        """Sampled Lebesgue weight at return times >= k."""
        return float(sum(w for t, w in self.histogram if t >= k))


def _alpha_from_tail(tail_points, ceiling: float) -> float:
    # descending geometric grid from the ceiling; the first rate whose
    # constraints all hold wins, zero if none does within fifty octaves
    for j in range(8 * 50):
        zeta = ceiling * 2.0 ** (-j / 8)
        if all(T <= math.exp(-zeta * t)
               for t, T in tail_points if t >= 1.0 / zeta):
            return zeta
    return 0.0


def return_time_distribution(nest: PrincipalNest, n: int,
                             sample_budget: int = 400, *,
                             epsilon: float = 0.05,
                             qs_params: Optional[QSParameters] = None
                             ) -> TimeDistribution:
    """Sample the first-return time distribution of level n under
    Lebesgue weight.

    Needs level n+1 built (central returns must be recognizable) and
    n >= 1 (the window thresholds quote the parent contraction factor).
    A sample budget below 100 cannot give an honest histogram and is
    refused. When qs_params is given, each distinct sampled time k also
    gets a certified capacity upper bound for the set still returning
    at time >= k, reported in capacity_tail.
    """
    if not 1 <= n < nest.depth:
        raise LevelMissing(
            f"distribution at level {n} needs levels {n} and {n + 1} built")
    if sample_budget < 100:
        raise BudgetExceeded(
            f"sample budget {sample_budget} below the minimum of 100")

    branches, failed = _stratified_branches(nest, n, sample_budget)
    if not branches:
        raise MissingData(f"no branch resolved at level {n}")

    lv = nest.level(n)
    two_r = lv.radius * 2
    weights: dict[int, float] = {}
    central_weight = central_time = None
    for br in branches.values():
        w = float((br.domain[1] - br.domain[0]) / two_r)
        weights[br.return_time] = weights.get(br.return_time, 0.0) + w
        if br.folding:
            central_weight, central_time = w, br.return_time

    histogram = tuple(sorted(weights.items()))
    total = sum(weights.values())

    c_prev = float(nest.scaling_ratio(n - 1))
    window = (c_prev ** (-1.0 + 2 * epsilon), c_prev ** (-1.0 - 2 * epsilon))
    inside = sum(w for t, w in histogram if window[0] <= t <= window[1])

    tail_points = []
    acc = total
    for t, w in histogram:
        tail_points.append((t, acc))  # tail at k = t: all times >= t
        acc -= w
    alpha = _alpha_from_tail(tail_points, c_prev)

    cap_tail = None
    if qs_params is not None:
        ambient = (lv.interval.lower, lv.interval.upper)
        rows = []
        for t, _ in histogram:
            comps = sorted((br.domain for br in branches.values()
                            if br.return_time >= t),
                           key=lambda d: float(d[0]))
            bound = capacity_bound(IntervalSet(ambient, tuple(comps)),
                                   qs_params)
            rows.append((t, float(bound.upper)))
        cap_tail = tuple(rows)

    return TimeDistribution(
        level=n,
        histogram=histogram,
        branch_count=len(branches),
        sampled_strata=sample_budget,
        failed_strata=failed,
        total_weight=total,
        central_weight=central_weight,
        central_time=central_time,
        epsilon=epsilon,
        concentration_window=window,
        concentration=inside / total,
        alpha_estimate=alpha,
        capacity_tail=cap_tail,
    )


# ---------------------------------------------------------------------------
# expansion profile of the return branches


@dataclass(frozen=True)
class HyperbolicityProfile:
    """Grid-sampled expansion rates of the non-central first-return
    branches at one level.

    branch_rates holds, per sampled branch, the minimum over the grid
    of ln|derivative of the return| divided by the return time; rate is
    the worst of those and plays the role of the level's expansion
    floor. distortions compares the extreme derivatives over each
    branch against the 2^n budget. refinement_warnings lists branches
    whose rate moved by more than five percent when the grid was
    doubled; their entries are still reported, from the finer grid.

    floor_margin is the slack, in log units, of the pointwise bound
    that a truncated derivative along a branch exceeds the starting
    distance to the centre times the cubed parent contraction factor,
    minimized over all sampled points and truncation depths.
    """

    level: int
    grid: int
    branch_rates: tuple
    rate: float
    rate_branch: int
    distortions: tuple
    distortion_bound: float
    distortion_excesses: tuple
    refinement_warnings: tuple
    floor_ok: bool
    floor_margin: float
    _minima: dict = field(repr=False, compare=False, default_factory=dict)

    def truncated_rate(self, index: int, k: int) -> float:
        """Sampled minimum of ln|derivative after k steps| / k on one
        branch; k may not exceed the branch return time."""
        series = self._minima.get(index)
        if series is None:
            raise MissingData(f"branch {index} was not profiled")
        if not 1 <= k <= len(series):
            raise DomainError(
                f"truncation {k} outside 1..{len(series)} on branch {index}")
        return series[k - 1] / k


def _grid_points(ctx, domain, grid: int, prec: int):
    # narrow domains sit far from zero, so the offsets drown at the
    # default context precision; add in the tower context instead
    lo, hi = domain
    w = ctx.sub(hi, lo)
    return [ctx.add(lo, ctx.mul(w, hp((2 * i + 1) / (2 * grid), prec)))
            for i in range(grid)]


def hyperbolicity_profile(nest: PrincipalNest, n: int, grid: int = 6,
                          samples: int = 120) -> HyperbolicityProfile:
    """Profile the expansion of the non-central return branches of
    level n over stratified samples and per-branch grids.

    Rates are reported from a grid of 3*grid points per branch (the
    base grid plus its doubling); a branch whose base-grid rate
    disagrees with the refined one by more than five percent is listed
    in refinement_warnings. Orbit segments run at tower precision, the
    logarithms in doubles; between returns the orbit stays outside the
    level interval, so no intermediate point comes near the centre and
    the double logarithms are safe.
    """
    if not 1 <= n < nest.depth:
        raise LevelMissing(
            f"profile at level {n} needs levels {n} and {n + 1} built")
    if grid < 2 or samples < 8:
        raise DomainError(f"grid {grid} and samples {samples} too small")

    branches, _ = _stratified_branches(nest, n, samples)
    branches = {i: b for i, b in branches.items() if not b.folding}
    if not branches:
        raise MissingData(f"no non-central branch resolved at level {n}")

    m = nest.map
    prec = nest.precision
    log_cp3 = 3.0 * math.log(float(nest.scaling_ratio(n - 1)))

    rates, distortions, warnings, excesses = [], [], [], []
    minima: dict = {}
    floor_margin = math.inf
    bound = 2.0 ** n

    for idx in sorted(branches):
        br = branches[idx]
        r = br.return_time
        coarse = _grid_points(m.ctx, br.domain, grid, prec)
        fine = _grid_points(m.ctx, br.domain, 2 * grid, prec)
        series = [math.inf] * r
        totals_coarse, totals_all = [], []
        for pt in coarse + fine:
            x = pt
            s = 0.0
            log_x0 = math.log(abs(float(x)))
            for k in range(1, r + 1):
                s += math.log(2.0 * abs(float(x)))
                if s < series[k - 1]:
                    series[k - 1] = s
                margin = s - log_x0 - log_cp3
                if margin < floor_margin:
                    floor_margin = margin
                x = m.step(x)
            totals_all.append(s)
            if len(totals_coarse) < grid:
                totals_coarse.append(s)
        rate_coarse = min(totals_coarse) / r
        rate = min(totals_all) / r
        if abs(rate_coarse - rate) > 0.05 * abs(rate):
            warnings.append(idx)
        rates.append((idx, rate))
        dist = math.exp(max(totals_all) - min(totals_all))
        distortions.append((idx, dist))
        if dist > bound:
            excesses.append(idx)
        minima[idx] = series

    worst_idx, worst = min(rates, key=lambda iv: iv[1])
    return HyperbolicityProfile(
        level=n,
        grid=grid,
        branch_rates=tuple(rates),
        rate=worst,
        rate_branch=worst_idx,
        distortions=tuple(distortions),
        distortion_bound=bound,
        distortion_excesses=tuple(excesses),
        refinement_warnings=tuple(warnings),
        floor_ok=floor_margin > 0.0,
        floor_margin=floor_margin,
        _minima=minima,
    )


# ---------------------------------------------------------------------------
# long-orbit estimators

_ORBIT_CAP = 10 ** 7


def _refuse_regular(m: QuadraticMap):
    try:
        probe = _attracting_cycle_probe(m, NestBudgets())
    except _Escalate:
        # the probe's orbit fell out of the invariant interval at this
        # precision; no cycle was certified, let the estimator proceed
        probe = None
    if probe is not None:
        raise RegularParameter(period=probe[0], multiplier=probe[1])


def _marker_times(a, precision: int, levels: int):
    """Return times of a shallow tower for annotating orbit series;
    towers that refuse to build annotate nothing and say why."""
    try:
        tower = build_principal_nest(
            a, levels, NestBudgets(precision_start=precision))
    except RegularParameter:
        raise
    except Exception as e:  # noqa: BLE001 - the note carries the reason
        return {}, f"no tower markers: {type(e).__name__}: {e}"
    return ({lv.v - 1: k for k, lv in enumerate(tower.levels)
             if lv.v is not None and lv.v >= 2}, None)


@dataclass(frozen=True)
class ExpansionEstimate:
    """Derivative growth along the orbit of the critical value.

    The series is ln|derivative of the k-th iterate| at the critical
    value, divided by k. final is its last term, running_min its
    minimum over k >= k_floor (transients below k_floor carry no
    information about the limit). prefix stores the first terms
    exactly; checkpoints thins the rest geometrically. landing_markers
    pins the series at the steps one short of each critical return
    time, where the growth rate historically dips.

    Beyond a few hundred steps the computed orbit is a pseudo-orbit:
    pointwise accuracy is gone while the statistics remain
    representative, which is exactly the regime a time average cares
    about.
    """

    parameter: mpfr
    steps: int
    k_floor: int
    final: float
    running_min: float
    running_min_at: int
    prefix: tuple
    checkpoints: tuple
    landing_markers: tuple
    tower_note: Optional[str]


def ce_estimator(a, N: int, *, k_floor: int = 50,
                 precision: int = DEFAULT_PRECISION,
                 marker_levels: int = 3) -> ExpansionEstimate:
    """Stream the derivative growth series along the critical value
    orbit for N steps.

    Parameters with an attracting or superstable cycle within the probe
    budget are refused; for them the series limit is a cycle artifact,
    not an expansion rate.
    """
    if not 1 <= N <= _ORBIT_CAP:
        raise DomainError(f"orbit length {N} outside 1..{_ORBIT_CAP}")
    m = family(a, precision)
    _refuse_regular(m)
    markers, note = _marker_times(a, precision, marker_levels)

    checks = set()
    k = 256
    while k <= N:
        checks.add(int(k))
        k *= 1.17

    x = m.step(hp(0, precision))
    s = 0.0
    prefix: list = []
    checkpoints: list = []
    marks: list = []
    best, best_at = math.inf, 0
    for k in range(1, N + 1):
        fx = abs(float(x))
        if fx == 0.0:
            # the orbit hit the centre exactly: superstable beyond the
            # probe budget
            raise RegularParameter(
                f"critical orbit is exactly periodic with period {k}",
                period=k, multiplier=0.0)
        s += math.log(2.0 * fx)
        ak = s / k
        if k <= 256:
            prefix.append(ak)
        elif k in checks:
            checkpoints.append((k, ak))
        if k >= k_floor and ak < best:
            best, best_at = ak, k
        lvl = markers.get(k)
        if lvl is not None:
            marks.append((lvl, k + 1, ak))
        x = m.step(x)

    return ExpansionEstimate(
        parameter=m.a,
        steps=N,
        k_floor=k_floor,
        final=s / N,
        running_min=best if best < math.inf else s / N,
        running_min_at=best_at if best_at else N,
        prefix=tuple(prefix),
        checkpoints=tuple(checkpoints),
        landing_markers=tuple(marks),
        tower_note=note,
    )


@dataclass(frozen=True)
class RecurrenceReport:
    """How fast the critical orbit refuses to come back to the centre.

    exponent is the running maximum of -ln|x_k| / ln k over the orbit
    of the critical value (k >= 2), the polynomial recurrence rate the
    orbit has exhibited so far; history records each step where the
    maximum moved. gamma_counts counts the visits below the polynomial
    thresholds k**(-gamma) for each gamma in gamma_grid, with the step
    of the last such visit alongside.

    central_hits lists the steps whose point fell inside the deepest
    tower level (capped at 4096 stored entries; the count is exact),
    the raw material for return-time bookkeeping.
    """

    parameter: mpfr
    steps: int
    exponent: float
    exponent_at: int
    history: tuple
    gamma_grid: tuple
    gamma_counts: tuple
    gamma_last_hit: tuple
    deepest_level: Optional[int]
    deepest_radius: Optional[float]
    central_hits: tuple
    central_hit_count: int
    tower_note: Optional[str]


_GAMMA_GRID = (0.8, 1.0, 1.2, 1.5)


def recurrence_exponent(a, N: int, *,
                        precision: int = DEFAULT_PRECISION,
                        marker_levels: int = 3) -> RecurrenceReport:
    """Track the polynomial recurrence exponent of the critical value
    orbit over N steps, with hit counts against a fixed gamma grid and
    the visits to the deepest available tower level."""
    if not 2 <= N <= _ORBIT_CAP:
        raise DomainError(f"orbit length {N} outside 2..{_ORBIT_CAP}")
    m = family(a, precision)
    _refuse_regular(m)

    deepest_level = deepest_radius = None
    note = None
    try:
        tower = build_principal_nest(
            a, marker_levels, NestBudgets(precision_start=precision))
    except RegularParameter:
        raise
    except Exception as e:  # noqa: BLE001
        note = f"no tower: {type(e).__name__}: {e}"
    else:
        deepest_level = tower.depth
        deepest_radius = float(tower.radius(tower.depth))

    x = m.step(hp(0, precision))
    best, best_at = -math.inf, 0
    history: list = []
    counts = [0] * len(_GAMMA_GRID)
    last_hit: list = [None] * len(_GAMMA_GRID)
    hits: list = []
    hit_count = 0
    for k in range(1, N + 1):
        fx = abs(float(x))
        if fx == 0.0:
            raise RegularParameter(
                f"critical orbit is exactly periodic with period {k}",
                period=k, multiplier=0.0)
        if k >= 2:
            u = -math.log(fx)
            L = math.log(k)
            val = u / L
            if val > best:
                best, best_at = val, k
                history.append((k, val))
            for i, g in enumerate(_GAMMA_GRID):
                if u > g * L:
                    counts[i] += 1
                    last_hit[i] = k
        if deepest_radius is not None and fx <= deepest_radius:
            hit_count += 1
            if len(hits) < 4096:
                hits.append(k)
        x = m.step(x)

    return RecurrenceReport(
        parameter=m.a,
        steps=N,
        exponent=best,
        exponent_at=best_at,
        history=tuple(history),
        gamma_grid=_GAMMA_GRID,
        gamma_counts=tuple(counts),
        gamma_last_hit=tuple(last_hit),
        deepest_level=deepest_level,
        deepest_radius=deepest_radius,
        central_hits=tuple(hits),
        central_hit_count=hit_count,
        tower_note=note,
    )


# ---------------------------------------------------------------------------
# quality predicates


@dataclass(frozen=True)
class ClassifierConfig:
    """Thresholds shared by the landing and branch predicates.

    epsilon is the slack exponent entering every time window.
    base_level anchors the induction that defines trusted branches;
    base_rate is the expansion floor at that anchor (take the profiled
    rate there) and is consulted only by the branch predicate.
    sparsity_coefficient scales the 2^level factor that every prefix
    density bound carries.
    """

    epsilon: float = 0.05
    base_level: int = 1
    sparsity_coefficient: float = 6.0
    base_rate: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 0.25:
            raise DomainError(f"slack exponent {self.epsilon} outside (0, 1/4]")
        if self.base_level < 0:
            raise DomainError(f"anchor level {self.base_level} negative")
        if not self.sparsity_coefficient > 0:
            raise DomainError("sparsity coefficient must be positive")


@dataclass(frozen=True)
class LandingFlags:
    """Verdict of the itinerary predicate, coarsest to finest:
    standard, excellent, cool. Each finer flag requires the coarser
    one. violated lists every clause that failed, whether or not an
    earlier failure already settled the flags."""

    level: int
    length: int
    standard: bool
    excellent: bool
    cool: bool
    violated: tuple


def _pow(base: float, exponent: float) -> float:
    # extreme contraction factors push thresholds past the float range;
    # an overflowing window start means the clause never applies
    try:
        return base ** exponent
    except OverflowError:
        return math.inf


def _prefix_density_ok(flags: Sequence[bool], lo: float, coeff: float,
                       *, strict: bool = False) -> bool:
    # prefix counts must stay below coeff * k on the window of k; an
    # infinite lo leaves the window empty and the clause vacuous
    count = 0
    for k, f in enumerate(flags, start=1):
        if f:
            count += 1
        inside = k > lo if strict else k >= lo
        if inside and not count < coeff * k:
            return False
    return True


def classify_landing(address: Sequence[int], times: Sequence[int],
                     level: int, c_here, c_prev,
                     config: Optional[ClassifierConfig] = None,
                     trusted: Optional[Callable[[int], bool]] = None
                     ) -> LandingFlags:
    """Grade a landing itinerary by the density of its return times
    and of its untrusted entries.

    address and times are parallel: the branch indices the itinerary
    rides and their return times at the given level. c_here and c_prev
    are the contraction factors of the level and of its parent; every
    threshold is an explicit power of one of them. trusted decides
    membership of a branch index in the certified-good set of the
    level; at the induction anchor every branch is trusted and None
    means exactly that.

    The verdict lists every violated clause by name:

      length-window        itinerary length within its two-sided bound
      time-cap             no time reaches the hard ceiling
      short-times-sparse   short times thin in large prefixes
      long-times-sparse    long times thin in large prefixes
      untrusted-sparse     untrusted entries thin in large prefixes
      trusted-start        the first entries all trusted
      short-times-sparse-tight, untrusted-sparse-tight,
      long-times-sparse-tight    same densities on wider windows
      no-long-start        the first entries free of long times
    """
    if config is None:
        config = ClassifierConfig()
    if level < 1:
        raise DomainError(f"itinerary predicate needs level >= 1, got {level}")
    m = len(times)
    if m == 0:
        raise MissingData("empty itinerary")
    if address is not None and len(address) != m:
        raise MissingData(
            f"{len(address)} indices against {m} times")

    cn = float(c_here)
    cp = float(c_prev)
    if not (0.0 < cn < 1.0 and 0.0 < cp < 1.0):
        raise DomainError("contraction factors must lie in (0, 1)")

    eps = config.epsilon
    coeff = config.sparsity_coefficient * 2.0 ** level
    short_cut = _pow(cp, -1.0 + 2 * eps)
    long_cut = _pow(cp, -1.0 - 2 * eps)
    short = [r < short_cut for r in times]
    long_ = [r > long_cut for r in times]
    if trusted is None:
        untrusted = [False] * m
    else:
        untrusted = [not trusted(j) for j in address]

    violated = []
    if not cn ** -0.5 < m < _pow(cn, -1.0 - 2 * eps):
        violated.append("length-window")
    cap = _pow(cp, -14.0)
    if not all(r < cap for r in times):
        violated.append("time-cap")
    if not _prefix_density_ok(short, _pow(cp, -2.0), coeff * cp ** (eps / 10)):
        violated.append("short-times-sparse")
    if not _prefix_density_ok(long_, _pow(cn, -1.0 / level),
                              coeff * math.exp(-(cp ** (eps / 5)))):
        violated.append("long-times-sparse")
    if not _prefix_density_ok(untrusted, _pow(cp, -2.0),
                              coeff * cp ** (1.0 / 20), strict=True):
        violated.append("untrusted-sparse")

    head = cp ** (-1.0 / 30)
    if not all(not untrusted[i] for i in range(m) if i + 1 <= head):
        violated.append("trusted-start")
    if not _prefix_density_ok(short, cp ** (-eps / 5),
                              coeff * cp ** (eps / 10)):
        violated.append("short-times-sparse-tight")
    if not _prefix_density_ok(untrusted, head, coeff * cp ** (1.0 / 60)):
        violated.append("untrusted-sparse-tight")
    if not _prefix_density_ok(long_, _pow(cp, -200.0), coeff * cp ** 100.0):
        violated.append("long-times-sparse-tight")
    head5 = _pow(math.e, cp ** (-eps / 5) / 2.0)
    if not all(not long_[i] for i in range(m) if i + 1 <= head5):
        violated.append("no-long-start")

    base = {"length-window", "time-cap", "short-times-sparse",
            "long-times-sparse"}
    standard = not any(v in base for v in violated)
    excellent = standard and "untrusted-sparse" not in violated
    cool = excellent and not any(
        v in {"trusted-start", "short-times-sparse-tight",
              "untrusted-sparse-tight", "long-times-sparse-tight",
              "no-long-start"} for v in violated)
    return LandingFlags(
        level=level,
        length=m,
        standard=standard,
        excellent=excellent,
        cool=cool,
        violated=tuple(violated),
    )


@dataclass(frozen=True)
class BranchFlags:
    """Verdict of the branch predicate. trusted means the branch rides
    an excellent itinerary and keeps its distance from the centre;
    hyperbolic means its sampled expansion clears the anchored floor,
    both in full and in truncation. inclusion_ok records the empirical
    expectation that trusted branches test hyperbolic; a False here is
    a finding, not an error."""

    level: int
    index: int
    trusted: bool
    hyperbolic: bool
    violated: tuple
    inclusion_ok: bool


def branch_itinerary(nest: PrincipalNest, branch: ReturnBranch):
    """Itinerary of a return branch through the previous level, with
    the per-entry return times.

    The central branch rides the critical landing itinerary of the
    parent level; any other branch is walked explicitly from its
    midpoint. The additivity of return times is checked on the way and
    a mismatch reported as unstable combinatorics.
    """
    n = branch.level
    if n < 1:
        raise DomainError("level-0 branches have no parent itinerary")
    parent = nest.level(n - 1)
    if parent.v is None:
        raise MissingData(f"no return time at level {n - 1}")

    if branch.folding:
        if parent.critical_address is None:
            raise MissingData(f"no critical itinerary at level {n - 1}")
        addr = parent.critical_address
    else:
        ctx = nest.map.ctx
        x = ctx.div(ctx.add(branch.domain[0], branch.domain[1]), 2)
        for _ in range(parent.v):
            x = nest.map.step(x)
        addr = landing_address(nest, n - 1, x).address

    times = tuple(nest.branch_return_time(n - 1, j) for j in addr)
    total = parent.v + sum(times)
    if total != branch.return_time:
        raise CombinatoricsUnstable(
            f"itinerary times add to {total}, branch returns in "
            f"{branch.return_time}")
    return addr, times


def classify_return_branch(branch: ReturnBranch, level_width, c_prev,
                           config: ClassifierConfig,
                           profile: HyperbolicityProfile,
                           itinerary_excellent: bool) -> BranchFlags:
    """Grade one return branch: distance from the centre plus the
    quality of the itinerary it rides on one side, sampled expansion
    against the anchored floor on the other.

    level_width is the diameter of the branch's level interval and
    c_prev the parent contraction factor. profile must cover the
    branch; config.base_rate must be set. The central branch is outside
    the branch predicate by construction and comes back untrusted with
    a single marker clause.
    """
    n = branch.level
    if config.base_rate is None:
        raise MissingData("config.base_rate unset; profile the anchor level")
    if n < config.base_level:
        raise DomainError(
            f"branch level {n} below the anchor {config.base_level}")

    if branch.folding:
        return BranchFlags(level=n, index=branch.index, trusted=False,
                           hyperbolic=False, violated=("central-branch",),
                           inclusion_ok=True)

    cp = float(c_prev)
    width = float(level_width)
    violated = []

    if n == config.base_level:
        trusted = True  # the induction anchor trusts every branch
    else:
        distance = min(abs(float(branch.domain[0])),
                       abs(float(branch.domain[1])))
        if not itinerary_excellent:
            violated.append("itinerary-not-excellent")
        if not distance > cp ** (1.0 / 3) * width:
            violated.append("too-central")
        trusted = not violated

    rates = dict(profile.branch_rates)
    rate = rates.get(branch.index)
    if rate is None:
        raise MissingData(f"branch {branch.index} missing from the profile")
    drop = config.base_level - n
    if not rate >= config.base_rate * (1 + 2.0 ** drop) / 2:
        violated.append("return-rate")

    r = branch.return_time
    truncated_ok = True
    if n >= 2:
        k_lo = cp ** (-3.0 / (n - 1))
        if k_lo <= r:
            floor = (config.base_rate * (1 + 2.0 ** (drop + 0.5)) / 2
                     - cp ** (2.0 / (n - 1)))
            for k in range(max(1, math.ceil(k_lo)), r + 1):
                if not profile.truncated_rate(branch.index, k) >= floor:
                    truncated_ok = False
                    break
    if not truncated_ok:
        violated.append("truncated-rate")

    hyperbolic = ("return-rate" not in violated
                  and "truncated-rate" not in violated)
    return BranchFlags(
        level=n,
        index=branch.index,
        trusted=trusted,
        hyperbolic=hyperbolic,
        violated=tuple(violated),
        inclusion_ok=(not trusted) or hyperbolic,
    )
