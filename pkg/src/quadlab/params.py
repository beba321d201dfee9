"""Parameter-space experiments.

Three layers. classify_parameter sorts a single parameter into the
empirical taxonomy: regular (certified attracting cycle), stochastic
candidate (a tower plus a positive sampled expansion floor),
renormalization suspect (tower stalled in a central-return run), or
undecided when every budget runs out first. locate_window brackets, by
bisection on the parameter, the maximal interval around a base
parameter on which a chosen piece of return combinatorics persists.
sweep runs the classifier over a seeded sample and tabulates verdicts.

Verdicts are evidence summaries, not theorems: a stochastic candidate
is a parameter whose orbit data looks stochastic at the sampled depth
and length, and a window endpoint is a bracketed combinatorial change,
certified only by the probes actually run. Everything here is
deterministic given (parameter, budgets, precision, seed), which is
what makes sweep results mergeable and classifications reproducible.
"""

from __future__ import annotations

import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

from gmpy2 import mpfr

from .core import (
    DEFAULT_PRECISION,
    decimal_string,
    exp2,
    family,
    hp,
    make_context,
    parse_decimal,
)
from .errors import (
    BudgetExceeded,
    CombinatoricsUnstable,
    DomainError,
    InsufficientWindows,
    NonHyperbolicBoundary,
    NotDefined,
    PrecisionExhausted,
    QuadlabError,
    RegularParameter,
    RenormalizationSuspected,
)
from .nest import (
    NestBudgets,
    build_principal_nest,
    detect_renormalization,
    landing_address,
    return_branch_at,
)
from .stats import ce_estimator, recurrence_exponent

_DOMAIN = (-0.25, 2.0)


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class ClassifyBudgets:
    """Work limits for one classification.

    cycle_transient/cycle_period_limit bound the attracting-cycle
    search; past them, tower construction decides. nest_levels is the
    tower depth attempted (two levels are the minimum for a stochastic
    verdict), orbit_steps the length of the expansion and recurrence
    series. confirm_suspects spends an extra restrictive-interval
    search on each renormalization suspect.
    """

    cycle_transient: int = 100_000
    cycle_period_limit: int = 1_000
    nest_levels: int = 2
    orbit_steps: int = 4_096
    precision_start: int = DEFAULT_PRECISION
    precision_max: int = 1 << 12
    confirm_suspects: bool = True

    def __post_init__(self):
        if min(self.cycle_transient, self.cycle_period_limit,
               self.orbit_steps) < 1 or self.nest_levels < 2:
            raise DomainError("classification budgets must be positive "
                              "and nest_levels at least 2")
        if self.precision_start > self.precision_max:
            raise DomainError("precision_start exceeds precision_max")


@dataclass(frozen=True)
class Regular:
    """Certified attracting cycle: |multiplier| < 1 strictly, with the
    cycle point carried as a decimal string so the certificate can be
    re-verified from scratch."""

    period: int
    multiplier: float
    cycle_point: Optional[str]


@dataclass(frozen=True)
class StochasticCandidate:
    depth: int
    expansion_estimate: float
    recurrence_estimate: float


@dataclass(frozen=True)
class RenormalizationSuspect:
    period_trail: tuple
    confirmed: bool


@dataclass(frozen=True)
class Undecided:
    report: str


Verdict = Union[Regular, StochasticCandidate, RenormalizationSuspect,
                Undecided]


@dataclass(frozen=True)
class Classification:
    parameter: str
    verdict: Verdict
    precision: int
    steps_used: int

    @property
    def kind(self) -> str:
        return type(self.verdict).__name__


RECORD_HEADER = ("a,kind,period,multiplier,depth,expansion,recurrence,"
                 "trail,precision,steps")


def classification_record(c: Classification) -> str:
    """One comma-separated line per parameter; absent fields stay
    empty so every verdict kind shares the column layout."""
    v = c.verdict
    period = multiplier = depth = expansion = recurrence = trail = ""
    if isinstance(v, Regular):
        period = str(v.period)
        multiplier = repr(v.multiplier)
    elif isinstance(v, StochasticCandidate):
        depth = str(v.depth)
        expansion = repr(v.expansion_estimate)
        recurrence = repr(v.recurrence_estimate)
    elif isinstance(v, RenormalizationSuspect):
        trail = "|".join(str(p) for p in v.period_trail)
        if v.confirmed:
            trail += "!"
    return ",".join((c.parameter, c.kind, period, multiplier, depth,
                     expansion, recurrence, trail, str(c.precision),
                     str(c.steps_used)))


def _float_cycle_candidate(af: float, transient: int, limit: int):
    """(period, point) when the double-precision critical orbit settles
    into near-periodicity, else None. Detection only; certification is
    done at working precision by the caller."""
    x = 0.0
    for _ in range(transient):
        x = af - x * x
        if abs(x) > 4.0:
            return None
    window = []
    for _ in range(3 * limit + 16):
        x = af - x * x
        if abs(x) > 4.0:
            return None
        window.append(x)
    loose = 2.0 ** -12
    tail = len(window) - limit
    for q in range(1, limit + 1):
        if abs(window[-1] - window[-1 - q]) >= loose:
            continue
        dev = max(abs(window[i] - window[i - q])
                  for i in range(tail, len(window)))
        if dev < loose:
            return q, window[-1]
    return None


def _polish_cycle(m, z0, q: int):
    """Newton-polish a candidate period-q point; (point, multiplier)
    when it certifies as strictly attracting, else None."""
    ctx = m.ctx
    tol = m.escape_tolerance()
    one = hp(1, m.precision)
    z = hp(z0, m.precision)
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
                return z, deriv
            return None
        if gp == 0:
            return None
        z = ctx.sub(z, ctx.div(g, gp))
    return None


def _regular_verdict(m, period: int, seed=None,
                     fallback_multiplier=None) -> Verdict:
    if seed is None:
        # settle onto the cycle before polishing
        x = hp(0, m.precision)
        for _ in range(4 * period + 4_096):
            x = m.step(x)
        seed = x
    polished = _polish_cycle(m, seed, period)
    if polished is None:
        if fallback_multiplier is None:
            return Undecided(f"period-{period} cycle failed certification")
        return Regular(period, float(fallback_multiplier), None)
    z, deriv = polished
    return Regular(period, float(deriv), decimal_string(z))


def _suspect_verdict(a, nest_budgets: NestBudgets,
                     budgets: ClassifyBudgets,
                     period: int) -> RenormalizationSuspect:
    trail = (period,)
    confirmed = False
    # restrictive-interval confirmation grid-scans the period map, so
    # torrential stall periods are reported unconfirmed rather than paid for
    if budgets.confirm_suspects and period <= 64:
        try:
            status = detect_renormalization(a, nest_budgets)
        except QuadlabError:
            status = None
        if status is not None and status.kind == "confirmed":
            confirmed = True
            if status.period != period:
                trail = trail + (status.period,)
    return RenormalizationSuspect(trail, confirmed)


def _extend_for_stall(a, nest_budgets: NestBudgets,
                      budgets: ClassifyBudgets):
    """Deepen the tower past the central-run limit; a suspect verdict
    when it stalls, None when the cascade breaks or budgets stop it."""
    deep = budgets.nest_levels + nest_budgets.central_run_limit + 2
    try:
        build_principal_nest(a, deep, nest_budgets)
    except RenormalizationSuspected as exc:
        return _suspect_verdict(a, nest_budgets, budgets, exc.period)
    except QuadlabError:
        return None
    return None


def classify_parameter(a, budgets: Optional[ClassifyBudgets] = None
                       ) -> Classification:
    """Sort one parameter into the verdict taxonomy.

    A cheap double-precision cycle search runs first and its candidate
    is certified at working precision (Newton-polished point, strict
    |Df^p| < 1 margin). Otherwise tower construction decides: a tower
    of depth >= 2 plus a positive expansion floor makes a stochastic
    candidate, a central-return stall a renormalization suspect, and
    exhausted budgets an Undecided verdict carrying the reason.
    """
    budgets = budgets or ClassifyBudgets()
    m = family(a, budgets.precision_start)
    label = decimal_string(m.a) if not isinstance(a, (int, float, str)) \
        else str(a)
    steps = budgets.cycle_transient + 3 * budgets.cycle_period_limit + 16

    candidate = _float_cycle_candidate(
        float(m.a), budgets.cycle_transient, budgets.cycle_period_limit)
    if candidate is not None:
        q, z = candidate
        verdict = _regular_verdict(m, q, seed=hp(z, m.precision))
        if isinstance(verdict, Regular):
            return Classification(label, verdict, m.precision, steps)

    nest_budgets = NestBudgets(precision_start=budgets.precision_start,
                               precision_max=budgets.precision_max)
    try:
        nest = build_principal_nest(m.a, budgets.nest_levels, nest_budgets)
    except RegularParameter as exc:
        # the tower's own detector certified what the float scan missed
        verdict = _regular_verdict(m, exc.period,
                                   fallback_multiplier=exc.multiplier)
        return Classification(label, verdict, m.precision, steps)
    except RenormalizationSuspected as exc:
        verdict = _suspect_verdict(m.a, nest_budgets, budgets, exc.period)
        return Classification(label, verdict, m.precision, steps)
    except (NonHyperbolicBoundary, NotDefined) as exc:
        return Classification(label, Undecided(str(exc)), m.precision, steps)
    except (BudgetExceeded, PrecisionExhausted) as exc:
        return Classification(
            label, Undecided(f"tower construction failed: {exc}"),
            m.precision, steps)

    if all(nest.levels[k].central for k in range(1, nest.depth)):
        # every built level returns centrally: the cascade signature.
        # A deeper build is cheap when it holds (return times double)
        # and surfaces the central-return stall if there is one.
        suspect = _extend_for_stall(m.a, nest_budgets, budgets)
        if suspect is not None:
            return Classification(label, suspect, m.precision, steps)

    steps += 2 * budgets.orbit_steps
    try:
        expansion = ce_estimator(m.a, budgets.orbit_steps,
                                 precision=nest.precision, marker_levels=0)
        recurrence = recurrence_exponent(m.a, budgets.orbit_steps,
                                         precision=nest.precision,
                                         marker_levels=0)
    except RegularParameter as exc:
        verdict = _regular_verdict(m, exc.period,
                                   fallback_multiplier=exc.multiplier)
        return Classification(label, verdict, m.precision, steps)
    except QuadlabError as exc:
        return Classification(
            label, Undecided(f"orbit statistics failed: {exc}"),
            nest.precision, steps)

    floor = expansion.running_min
    if floor <= 0.0:
        return Classification(
            label,
            Undecided(f"expansion floor {floor:.6f} <= 0 after "
                      f"{budgets.orbit_steps} steps"),
            nest.precision, steps)
    return Classification(
        label,
        StochasticCandidate(nest.depth, floor, recurrence.exponent),
        nest.precision, steps)


def verify_cycle(a, period: int, cycle_point: str,
                 precision: int = DEFAULT_PRECISION):
    """Independent re-check of a Regular certificate: returns the
    multiplier recomputed from the stored cycle point, raising
    DomainError when the point is not periodic to tolerance."""
    m = family(a, precision)
    ctx = m.ctx
    z = hp(cycle_point, precision)
    y = z
    deriv = hp(1, precision)
    for _ in range(period):
        deriv = ctx.mul(deriv, m.derivative(y))
        y = m.step(y)
    gap = ctx.abs(ctx.sub(y, z))
    if gap > ctx.mul(m.escape_tolerance(), hp(1 << 8, precision)):
        raise DomainError(f"stored point misses periodicity by {gap}")
    return deriv


# ---------------------------------------------------------------------------
# parameter windows


@dataclass(frozen=True)
class ParameterWindow:
    """Bracketed maximal parameter interval on which one piece of
    return combinatorics persists.

    lower/upper are certified-inside proxies (the bisection's inner
    endpoints, decimal strings); the true combinatorial change lies
    within tolerance outside each. piece is the phase-space interval
    carrying the combinatorics at the base parameter, which is what
    order comparisons against other windows of the same level use.
    certified means both endpoints and every interior resample probe
    reproduced the target; any mismatch lands in anomalies instead.
    """

    level: int
    kind: str
    target: object
    lower: str
    upper: str
    tolerance: float
    piece: tuple
    certified: bool
    anomalies: tuple
    probes: int
    precision: int

    # endpoint strings carry the full working precision; parsing them
    # at the ambient 53-bit context would erase deep windows entirely,
    # so every accessor re-parses at the stored precision

    def bounds(self) -> tuple:
        return (parse_decimal(self.lower, self.precision),
                parse_decimal(self.upper, self.precision))

    @property
    def width(self) -> float:
        lo, hi = self.bounds()
        return float(make_context(self.precision).sub(hi, lo))

    def center_value(self) -> mpfr:
        ctx = make_context(self.precision)
        lo, hi = self.bounds()
        return ctx.add(lo, ctx.div(ctx.sub(hi, lo), hp(2, self.precision)))

    @property
    def center(self) -> float:
        return float(self.center_value())

    def contains(self, other: "ParameterWindow", slack: float = 0.0) -> bool:
        ctx = make_context(self.precision)
        pad = hp(repr(self.tolerance + slack), self.precision)
        lo, hi = self.bounds()
        olo, ohi = other.bounds()
        return (olo >= ctx.sub(lo, pad)) and (ohi <= ctx.add(hi, pad))


# probe towers skip the expensive cycle search; a regular probe fails
# construction anyway and correctly counts as outside the window
_PROBE_REGULAR = {"regular_transient": 512, "regular_period_limit": 16}


class _WindowProbe:
    """Shared machinery: build a tower at a probe parameter, read off
    the combinatorial signature of the target kind at the target
    level. None means the probe is outside every window of this kind
    (construction failed, or the signature could not be resolved)."""

    def __init__(self, level, kind, nest_budgets, probe_budget):
        self.level = level
        self.kind = kind
        self.nest_budgets = nest_budgets
        self.probe_budget = probe_budget
        self.probes = 0

    def signature_of(self, nest):
        lv = nest.level(self.level)
        if lv.v is None or lv.critical_point is None:
            return None
        # signatures are cumulative: a branch index is only comparable
        # between parameters whose towers agree through this level, and
        # an address is only comparable within a fixed branch
        base = (tuple(nest.level(k).v for k in range(self.level + 1)),
                tuple(nest.level(k).tau for k in range(self.level + 1)))
        if self.kind == "level":
            return base
        try:
            branch = return_branch_at(nest, self.level,
                                      lv.critical_point).index
            if self.kind == "branch":
                return base + (branch,)
            return base + (branch,
                           landing_address(nest, self.level,
                                           lv.critical_point).address)
        except QuadlabError:
            return None

    def piece_of(self, nest):
        lv = nest.level(self.level)
        if self.kind == "level":
            nxt = nest.level(self.level + 1)
            return (decimal_string(nxt.interval.lower),
                    decimal_string(nxt.interval.upper))
        if self.kind == "branch":
            dom = return_branch_at(nest, self.level, lv.critical_point).domain
        else:
            dom = landing_address(nest, self.level, lv.critical_point).domain
        return (decimal_string(dom[0]), decimal_string(dom[1]))

    def __call__(self, b):
        self.probes += 1
        if self.probes > self.probe_budget:
            raise BudgetExceeded(
                f"window bisection used {self.probes} probes")
        try:
            nest = build_principal_nest(b, self.level + 1, self.nest_budgets)
        except (RegularParameter, RenormalizationSuspected, BudgetExceeded,
                PrecisionExhausted, NotDefined, NonHyperbolicBoundary):
            # combinatorics changed before the target level existed:
            # by definition that parameter is outside the window
            return None
        return self.signature_of(nest)


def _normalize_combinatorics(combinatorics):
    if combinatorics is None:
        return "level", None
    if isinstance(combinatorics, int):
        return "branch", combinatorics
    return "address", tuple(combinatorics)


def locate_window(a0, level: int, combinatorics=None, *,
                  precision: Optional[int] = None,
                  probe_budget: int = 2_000,
                  interior_checks: int = 8) -> ParameterWindow:
    """Bracket the maximal parameter interval around a0 realizing the
    given combinatorics at the given level.

    combinatorics: None brackets persistence of the whole level (return
    times and landing signs through it); an integer brackets the branch
    index the critical value lands in; a tuple of indices brackets its
    full landing address. The target must be what a0 itself realizes.
    Endpoints are found by outward geometric march then bisection down
    to 2^(-precision/2), probing a fresh tower per parameter.
    """
    if level < 1:
        raise DomainError("windows are defined for level >= 1")
    precision = precision or DEFAULT_PRECISION
    kind, target = _normalize_combinatorics(combinatorics)
    ctx = make_context(precision)
    nest_budgets = NestBudgets(precision_start=precision,
                               precision_max=max(precision, 1 << 12),
                               **_PROBE_REGULAR)
    probe = _WindowProbe(level, kind, nest_budgets, probe_budget)

    try:
        base = build_principal_nest(a0, level + 1, nest_budgets)
    except QuadlabError as exc:
        raise CombinatoricsUnstable(
            f"base parameter carries no level-{level + 1} tower: {exc}")
    base_sig = probe.signature_of(base)
    if base_sig is None:
        raise CombinatoricsUnstable(
            f"signature unresolved at the base parameter (level {level})")
    # the caller names only the outermost component (a branch index, an
    # address); the probe compares full cumulative signatures
    if target is not None and kind != "level" and base_sig[-1] != target:
        raise CombinatoricsUnstable(
            f"base parameter realizes {base_sig[-1]!r}, not {target!r}")
    target = base_sig
    piece = probe.piece_of(base)

    a0m = base.parameter
    tol = ctx.mul(hp(1, precision), exp2(-(precision // 2)))
    lo_edge = hp(_DOMAIN[0], precision)
    hi_edge = hp(_DOMAIN[1], precision)

    def march_and_bisect(direction):
        h = ctx.mul(tol, hp(1 << 12, precision))
        good = a0m
        bad = None
        while bad is None:
            cand = ctx.add(a0m, ctx.mul(hp(direction, precision), h))
            clipped = False
            if cand >= hi_edge:
                cand, clipped = hi_edge, True
            elif cand <= lo_edge:
                cand, clipped = lo_edge, True
            if probe(cand) == target:
                good = cand
                if clipped:
                    return good, None
            else:
                bad = cand
            h = ctx.mul(h, hp(2, precision))
        while ctx.abs(ctx.sub(bad, good)) > tol:
            mid = ctx.div(ctx.add(good, bad), hp(2, precision))
            if probe(mid) == target:
                good = mid
            else:
                bad = mid
        return good, bad

    lo_in, _ = march_and_bisect(-1)
    hi_in, _ = march_and_bisect(+1)

    anomalies = []
    for t in range(1, interior_checks + 1):
        frac = ctx.div(hp(t, precision), hp(interior_checks + 1, precision))
        x = ctx.add(lo_in, ctx.mul(frac, ctx.sub(hi_in, lo_in)))
        if probe(x) != target:
            anomalies.append(decimal_string(x))
    return ParameterWindow(
        level=level,
        kind=kind,
        target=target,
        lower=decimal_string(lo_in),
        upper=decimal_string(hi_in),
        tolerance=float(tol),
        piece=piece,
        certified=not anomalies,
        anomalies=tuple(anomalies),
        probes=probe.probes,
        precision=precision,
    )


def locate_adjacent_windows(a0, level: int, count: int, *,
                            precision: Optional[int] = None,
                            probe_budget: int = 2_000
                            ) -> tuple[ParameterWindow, ...]:
    """Chain of branch-combinatorics windows at one level, grown
    outward from a0 in both directions and returned in parameter
    order. Fewer than count windows come back when the parameter
    domain edge or the probe budget cuts a side short."""
    if count < 1:
        raise DomainError("count must be positive")
    precision = precision or DEFAULT_PRECISION
    ctx = make_context(precision)
    first = locate_window(a0, level, _seed_branch_target(a0, level, precision),
                          precision=precision, probe_budget=probe_budget)
    windows = [first]

    def grow(direction):
        nest_budgets = NestBudgets(precision_start=precision,
                                   precision_max=max(precision, 1 << 12),
                                   **_PROBE_REGULAR)
        probe = _WindowProbe(level, "branch", nest_budgets, probe_budget)
        edge = windows[-1] if direction > 0 else windows[0]
        anchor = parse_decimal(edge.upper if direction > 0 else edge.lower,
                               precision)
        h = ctx.mul(hp(repr(edge.tolerance), precision),
                    hp(1 << 4, precision))
        while len(windows) < count:
            cand = ctx.add(anchor, ctx.mul(hp(direction, precision), h))
            if not (_DOMAIN[0] < float(cand) < _DOMAIN[1]):
                return
            sig = probe(cand)
            known = {w.target for w in windows}
            if sig is not None and sig not in known:
                try:
                    w = locate_window(cand, level, sig[-1],
                                      precision=precision,
                                      probe_budget=probe_budget)
                except (CombinatoricsUnstable, BudgetExceeded):
                    return
                windows.append(w) if direction > 0 else windows.insert(0, w)
                anchor = parse_decimal(w.upper if direction > 0 else w.lower,
                                       precision)
                h = ctx.mul(hp(repr(w.tolerance), precision),
                            hp(1 << 4, precision))
            else:
                h = ctx.mul(h, hp(2, precision))

    while len(windows) < count:
        before = len(windows)
        grow(+1)
        if len(windows) < count:
            grow(-1)
        if len(windows) == before:
            break
    windows.sort(key=lambda w: w.center_value())
    return tuple(windows)


def _seed_branch_target(a0, level, precision):
    nest_budgets = NestBudgets(precision_start=precision,
                               precision_max=max(precision, 1 << 12),
                               **_PROBE_REGULAR)
    try:
        nest = build_principal_nest(a0, level + 1, nest_budgets)
        lv = nest.level(level)
        return return_branch_at(nest, level, lv.critical_point).index
    except QuadlabError as exc:
        raise CombinatoricsUnstable(
            f"no branch combinatorics at the base parameter: {exc}")


# ---------------------------------------------------------------------------
# phase-parameter comparison


def gap_ratio(left: float, mid: float, right: float) -> float:
    """Ratio of the right gap to the left gap of a monotone triple."""
    lgap = mid - left
    rgap = right - mid
    if lgap == 0 or rgap == 0:
        raise DomainError("degenerate triple")
    return rgap / lgap


@dataclass(frozen=True)
class PhaseParameterRow:
    targets: tuple
    phase_ratio: float
    parameter_ratio: float
    distortion: float


@dataclass(frozen=True)
class PhaseParameterReport:
    """Sampled ratio distortion of the phase-to-parameter
    correspondence at one level: for each consecutive window triple,
    the parameter-side gap ratio against the phase-side gap ratio of
    the defining pieces. band_width is the worst multiplicative
    distortion seen; the expectation is a band that tightens as the
    level grows, reported here and never asserted."""

    level: int
    windows: tuple
    rows: tuple
    band: tuple
    band_width: float


def phase_parameter_report(a0, level: int, *, count: int = 5,
                           precision: Optional[int] = None,
                           probe_budget: int = 2_000
                           ) -> PhaseParameterReport:
    windows = locate_adjacent_windows(a0, level, count,
                                      precision=precision,
                                      probe_budget=probe_budget)
    if len(windows) < 3:
        raise InsufficientWindows(
            f"phase-parameter comparison needs 3 windows, located "
            f"{len(windows)}")
    prec = windows[0].precision
    ctx = make_context(prec)

    def mp_ratio(left, mid, right):
        # gaps can sit many orders below the centers themselves, so the
        # quotient has to be formed before any narrowing to double
        lgap = ctx.sub(mid, left)
        rgap = ctx.sub(right, mid)
        if lgap == 0 or rgap == 0:
            raise DomainError("degenerate window triple")
        return float(ctx.div(rgap, lgap))

    def piece_center(w):
        lo = parse_decimal(w.piece[0], prec)
        hi = parse_decimal(w.piece[1], prec)
        return ctx.div(ctx.add(lo, hi), hp(2, prec))

    rows = []
    for k in range(1, len(windows) - 1):
        triple = windows[k - 1], windows[k], windows[k + 1]
        pr = mp_ratio(*(w.center_value() for w in triple))
        hr = mp_ratio(*(piece_center(w) for w in triple))
        rows.append(PhaseParameterRow(
            targets=tuple(w.target for w in triple),
            phase_ratio=hr,
            parameter_ratio=pr,
            distortion=pr / hr,
        ))
    dist = [abs(r.distortion) for r in rows]
    band = (min(dist), max(dist))
    width = max(max(d, 1.0 / d) for d in dist)
    return PhaseParameterReport(level=level, windows=windows,
                                rows=tuple(rows), band=band,
                                band_width=width)


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepResult:
    sample_range: tuple
    count: int
    seed: int
    classifications: tuple
    fractions: dict = field(compare=False)
    expansion_histogram: tuple
    recurrence_histogram: tuple

    def records(self) -> tuple:
        return tuple(classification_record(c) for c in self.classifications)

    def summary_text(self) -> str:
        lines = [f"sweep [{self.sample_range[0]}, {self.sample_range[1]}] "
                 f"count={self.count} seed={self.seed}"]
        for name in sorted(self.fractions):
            lines.append(f"  {name}: {self.fractions[name]:.3f}")
        for label, hist in (("expansion", self.expansion_histogram),
                            ("recurrence", self.recurrence_histogram)):
            if any(c for _, _, c in hist):
                lines.append(f"  {label} histogram:")
                for lo, hi, c in hist:
                    if c:
                        lines.append(f"    [{lo:g}, {hi:g}): {c}")
        return "\n".join(lines)


def _histogram(values, lo: float, step: float, bins: int) -> tuple:
    out = []
    for i in range(bins):
        left = lo + i * step
        out.append([left, left + step, 0])
    out.append([lo + bins * step, math.inf, 0])
    out.insert(0, [-math.inf, lo, 0])
    for v in values:
        for cell in out:
            if cell[0] <= v < cell[1]:
                cell[2] += 1
                break
    return tuple((a, b, c) for a, b, c in out)


def _sweep_task(args):
    a_repr, budgets = args
    return classify_parameter(a_repr, budgets)


def sweep(sample_range, count: int,
          budgets: Optional[ClassifyBudgets] = None, seed: int = 0, *,
          workers: int = 1) -> SweepResult:
    """Classify a seeded uniform sample of parameters.

    Deterministic: the sample is drawn by the seed alone and results
    are merged in parameter order regardless of worker scheduling.
    """
    lo, hi = float(sample_range[0]), float(sample_range[1])
    if not (_DOMAIN[0] <= lo < hi <= _DOMAIN[1]):
        raise DomainError(f"sweep range must sit inside {_DOMAIN}")
    if count < 1:
        raise DomainError("count must be positive")
    budgets = budgets or ClassifyBudgets()
    rng = random.Random(seed)
    draws = [repr(rng.uniform(lo, hi)) for _ in range(count)]
    draws.sort(key=float)
    tasks = [(d, budgets) for d in draws]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_task, tasks, chunksize=4))
    else:
        results = [_sweep_task(t) for t in tasks]
    results.sort(key=lambda c: float(c.parameter))

    fractions = {}
    for c in results:
        fractions[c.kind] = fractions.get(c.kind, 0) + 1
    fractions = {k: v / count for k, v in fractions.items()}
    stoch = [c.verdict for c in results
             if isinstance(c.verdict, StochasticCandidate)]
    return SweepResult(
        sample_range=(lo, hi),
        count=count,
        seed=seed,
        classifications=tuple(results),
        fractions=fractions,
        expansion_histogram=_histogram(
            [v.expansion_estimate for v in stoch], 0.0, 0.1, 8),
        recurrence_histogram=_histogram(
            [v.recurrence_estimate for v in stoch], 0.0, 0.25, 12),
    )


__all__ = [
    "Classification",
    "ClassifyBudgets",
    "ParameterWindow",
    "PhaseParameterReport",
    "PhaseParameterRow",
    "RECORD_HEADER",
    "Regular",
    "RenormalizationSuspect",
    "StochasticCandidate",
    "SweepResult",
    "Undecided",
    "classification_record",
    "classify_parameter",
    "gap_ratio",
    "locate_adjacent_windows",
    "locate_window",
    "phase_parameter_report",
    "sweep",
    "verify_cycle",
]
