"""Certified two-sided bounds in the quasisymmetric capacity calculus.

Every operation here returns bounds valid for a whole class of test
homeomorphisms described by a Holder exponent, never point estimates.
Rounding is therefore always directed: upper bounds round toward +inf,
lower bounds toward -inf, and rational inputs stay in exact rational
arithmetic whenever the formula allows it, so chained bounds can be
compared exactly.

MPFR's exponent range is fixed at roughly +-2^30, and the tail forms
below reach magnitudes like 2^(-6*2^n/q). A positive value falling under
the floor rounds up to the smallest representable positive number, which
keeps an upper bound sound, merely less sharp; a lower bound in the same
position rounds to zero. No operation in this module can turn a positive
exact upper bound into zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Integral, Rational
from typing import Optional, Sequence, Tuple, Union

import gmpy2
from gmpy2 import mpfr

from .errors import DomainError

__all__ = [
    "CapacityBound",
    "GammaSequence",
    "IntervalSet",
    "QSParameters",
    "branch_pullback_bound",
    "capacity_bound",
    "holder_bounds",
    "intermediate_label",
    "large_deviation_bound",
    "level_label",
    "sparse_form",
    "stirling_form",
    "tail_sum",
    "tree_compose",
]

Number = Union[int, float, Fraction, mpfr]

_PRECISION = 256

# Exact powers of two are kept as Fractions only while the exponent stays
# below this; past it the integers get unwieldy and mpfr takes over.
_EXACT_POW2_CAP = 1 << 20


def _ctx_up() -> gmpy2.context:
    return gmpy2.context(precision=_PRECISION, round=gmpy2.RoundUp)


def _ctx_down() -> gmpy2.context:
    return gmpy2.context(precision=_PRECISION, round=gmpy2.RoundDown)


def _is_rational(x) -> bool:
    return isinstance(x, Rational)


def _integral_value(x) -> Optional[int]:
    """x as a Python int when x is exactly an integer, else None."""
    if isinstance(x, Integral):
        return int(x)
    if isinstance(x, Fraction) and x.denominator == 1:
        return int(x)
    if isinstance(x, float) and x.is_integer():
        return int(x)
    if isinstance(x, mpfr) and gmpy2.is_integer(x):
        return int(x)
    return None


def _pow_directed(base, exponent, upward: bool, reciprocal: bool = False):
    """base**exponent (or base**(1/exponent)) rounded toward +inf
    (upward) or -inf.

    base >= 0 and exponent > 0. The exponent conversion must itself be
    rounded, and the safe direction flips with the side of 1 the base
    lies on; integral exponents skip that worry entirely.
    """
    ctx = _ctx_up() if upward else _ctx_down()
    if not reciprocal:
        e = _integral_value(exponent)
        if e is not None:
            return ctx.pow(base, e)
    elif exponent == 1:
        return ctx.pow(base, 1)
    # b**e is increasing in e exactly when b >= 1.
    exponent_up = upward if base >= 1 else not upward
    with _ctx_up() if exponent_up else _ctx_down():
        e_m = gmpy2.div(1, gmpy2.mpfr(exponent)) if reciprocal else gmpy2.mpfr(exponent)
    return ctx.pow(base, e_m)


# ---------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class IntervalSet:
    """A finite union of closed subintervals inside an ambient interval.

    Components are kept sorted and pairwise disjoint; closed intervals
    touching at an endpoint count as overlapping. Endpoints may be any
    mix of int, Fraction, float and mpfr; comparisons between them are
    exact.
    """

    ambient: Tuple[Number, Number]
    components: Tuple[Tuple[Number, Number], ...] = ()

    def __post_init__(self):
        ambient = tuple(self.ambient)
        components = tuple(tuple(c) for c in self.components)
        object.__setattr__(self, "ambient", ambient)
        object.__setattr__(self, "components", components)
        if len(ambient) != 2 or not ambient[0] < ambient[1]:
            raise DomainError(f"ambient interval is degenerate: {ambient!r}")
        lo, hi = ambient
        previous_right = None
        for c in components:
            if len(c) != 2 or c[0] > c[1]:
                raise DomainError(f"component endpoints out of order: {c!r}")
            if c[0] < lo or c[1] > hi:
                raise DomainError(f"component {c!r} leaves the ambient interval")
            if previous_right is not None and not previous_right < c[0]:
                raise DomainError(
                    f"components must be sorted and disjoint; {c!r} meets its predecessor"
                )
            previous_right = c[1]

    @property
    def all_rational(self) -> bool:
        return _is_rational(self.ambient[0]) and _is_rational(self.ambient[1]) and all(
            _is_rational(a) and _is_rational(b) for a, b in self.components
        )

    def ambient_length(self) -> Number:
        return self.ambient[1] - self.ambient[0]

    def component_ratios_exact(self) -> Tuple[Fraction, ...]:
        """|X_i|/|I| as exact Fractions; only valid when all_rational."""
        length = Fraction(self.ambient[1]) - Fraction(self.ambient[0])
        return tuple(
            (Fraction(b) - Fraction(a)) / length for a, b in self.components
        )

    def lebesgue_ratio(self) -> Number:
        """Total relative measure |X|/|I|, rounded down when inexact."""
        if self.all_rational:
            return sum(self.component_ratios_exact(), Fraction(0))
        down, up = _ctx_down(), _ctx_up()
        total = mpfr(0)
        for a, b in self.components:
            total = down.add(total, down.sub(b, a))
        return down.div(total, up.sub(self.ambient[1], self.ambient[0]))


@dataclass(frozen=True)
class QSParameters:
    """Quasisymmetry class data: constant gamma, Holder exponent k and
    the slack epsilon tied to it by epsilon >= 5(k - 1)."""

    gamma: Number
    k: Number
    epsilon: Number

    def __post_init__(self):
        if not self.gamma > 1:
            raise DomainError(f"qs constant must exceed 1, got {self.gamma!r}")
        if not self.k >= 1:
            raise DomainError(f"Holder exponent must be >= 1, got {self.k!r}")
        if not self.epsilon > 0:
            raise DomainError(f"slack must be positive, got {self.epsilon!r}")
        if self.epsilon < 5 * (Fraction(self.k) if _is_rational(self.k) else self.k) - 5:
            raise DomainError(
                f"slack {self.epsilon!r} inconsistent with exponent {self.k!r}"
            )


@dataclass(frozen=True)
class CapacityBound:
    """A certified sandwich 0 <= lower <= value <= upper <= 1 for the
    relative size of a set under every test map of the class.

    derivation records which rules produced the bound; constant, when
    set, tags the rung of the decreasing constant ladder the bound is
    valid for (see level_label / intermediate_label).
    """

    lower: Number
    upper: Number
    derivation: Tuple[str, ...] = ()
    constant: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "derivation", tuple(self.derivation))
        if not 0 <= self.lower:
            raise DomainError(f"lower bound negative: {self.lower!r}")
        if not self.lower <= self.upper:
            raise DomainError(
                f"bounds out of order: lower={self.lower!r} upper={self.upper!r}"
            )
        if not self.upper <= 1:
            raise DomainError(f"upper bound exceeds 1: {self.upper!r}")


def level_label(n: int) -> str:
    """Tag for bounds valid at the n-th rung of the constant ladder."""
    return f"qs-level-{n}"


def intermediate_label(n: int) -> str:
    """Tag for bounds valid at the intermediate constant between rungs
    n and n+1; branch pullbacks land here."""
    return f"qs-level-{n}-intermediate"


@dataclass(frozen=True)
class GammaSequence:
    """The decreasing ladder of qs constants used to absorb distortion
    losses level by level: rung n carries base*(n+1)/n, with the
    intermediate constant base*(2n+3)/(2n+1) strictly between rung n
    and rung n+1."""

    base: Number
    n: int

    def __post_init__(self):
        if not isinstance(self.n, Integral) or self.n < 1:
            raise DomainError(f"ladder index must be a positive integer, got {self.n!r}")
        if not self.base > 1:
            raise DomainError(f"base constant must exceed 1, got {self.base!r}")

    def _scaled(self, num: int, den: int) -> Number:
        if _is_rational(self.base):
            return Fraction(self.base) * Fraction(num, den)
        return _ctx_up().mul(self.base, Fraction(num, den))

    @property
    def gamma_n(self) -> Number:
        return self._scaled(self.n + 1, self.n)

    @property
    def gamma_tilde_n(self) -> Number:
        return self._scaled(2 * self.n + 3, 2 * self.n + 1)

    @property
    def label(self) -> str:
        return level_label(self.n)

    @property
    def tilde_label(self) -> str:
        return intermediate_label(self.n)

    def successor(self) -> "GammaSequence":
        return GammaSequence(self.base, self.n + 1)


# ---------------------------------------------------------------------------
# Elementary bounds


def holder_bounds(ratio: Number, k: Number) -> Tuple[Number, Number]:
    """Two-sided bound for the image ratio of a subinterval of relative
    size `ratio` under any test map of Holder class k:

        (1/k) * ratio**k  <=  image ratio  <=  min(1, (k*ratio)**(1/k))
    """
    if not 0 <= ratio <= 1:
        raise DomainError(f"ratio must lie in [0, 1], got {ratio!r}")
    if not k >= 1:
        raise DomainError(f"Holder exponent must be >= 1, got {k!r}")
    if k == 1:
        return ratio, ratio

    ki = _integral_value(k)
    if ki is not None and _is_rational(ratio):
        lower: Number = Fraction(ratio) ** ki / ki
    else:
        lower = _ctx_down().div(_pow_directed(ratio, k, upward=False), k)

    if _is_rational(ratio) and _is_rational(k):
        scaled: Number = Fraction(k) * Fraction(ratio)
    else:
        scaled = _ctx_up().mul(k, ratio)
    if _is_rational(k):
        upper = _pow_directed(scaled, 1 / Fraction(k), upward=True)
    else:
        upper = _pow_directed(scaled, k, upward=True, reciprocal=True)
    if upper >= 1:
        upper = 1
    return lower, upper


def capacity_bound(X: IntervalSet, params: QSParameters,
                   constant: Optional[str] = None) -> CapacityBound:
    """Certified capacity sandwich for the interval set X.

    The lower bound is the Lebesgue ratio |X|/|I| (the identity is a
    test map); the upper bound applies the Holder estimate to each
    component and adds, clamped at 1.
    """
    lower = X.lebesgue_ratio()
    trace = ["lebesgue-lower"]

    k = params.k
    if k == 1:
        upper: Number = lower if lower <= 1 else 1
        trace.append(f"holder-upper per component ({len(X.components)} at k=1)")
    else:
        up = _ctx_up()
        if X.all_rational and _is_rational(k):
            ratios: Sequence[Number] = X.component_ratios_exact()
        else:
            down = _ctx_down()
            length_low = down.sub(X.ambient[1], X.ambient[0])
            ratios = [up.div(up.sub(b, a), length_low) for a, b in X.components]
        total = mpfr(0)
        for r in ratios:
            term = holder_bounds(r if r <= 1 else 1, k)[1]
            total = up.add(total, term)
        trace.append(
            f"holder-upper per component ({len(X.components)} at k={k})"
        )
        trace.append("union-sum")
        if total >= 1:
            upper = 1
            trace.append("clamp-at-1")
        else:
            upper = total
    if upper < lower:
        # Directed rounding never lets this happen; guard stays as a tripwire.
        raise DomainError("internal: directed rounding produced a crossed sandwich")
    return CapacityBound(lower, upper, tuple(trace), constant)


# ---------------------------------------------------------------------------
# Composition rules


def tree_compose(outer: CapacityBound, inner_sup: CapacityBound,
                 witness_lower: Optional[Number] = None) -> CapacityBound:
    """Compose along a tree decomposition: the target set sits inside a
    union of disjoint subintervals bounded by `outer`, and within each
    subinterval its relative capacity is at most `inner_sup.upper`.

    Upper bounds multiply. Lower bounds do not compose (the witnesses
    live on different intervals), so the result's lower is 0 unless a
    directly verified witness value is supplied.
    """
    if outer.constant is not None and inner_sup.constant is not None \
            and outer.constant != inner_sup.constant:
        raise DomainError(
            f"tree composition needs one qs class, got {outer.constant!r} "
            f"and {inner_sup.constant!r}"
        )
    if _is_rational(outer.upper) and _is_rational(inner_sup.upper):
        upper: Number = Fraction(outer.upper) * Fraction(inner_sup.upper)
    else:
        upper = _ctx_up().mul(outer.upper, inner_sup.upper)
    lower: Number = 0
    if witness_lower is not None:
        if not 0 <= witness_lower <= upper:
            raise DomainError(
                f"witness {witness_lower!r} outside [0, {upper!r}]"
            )
        lower = witness_lower
    constant = outer.constant if outer.constant == inner_sup.constant else None
    return CapacityBound(
        lower, upper,
        outer.derivation + inner_sup.derivation + ("tree-product",),
        constant,
    )


def branch_pullback_bound(bound: CapacityBound, n: int) -> CapacityBound:
    """Transfer an upper bound through the inverse of a level-n return
    branch: the capacity of the preimage, measured at the intermediate
    constant of rung n, is at most 2^n times the input bound.

    The input must be valid at rung n (or carry no tag). The witness
    does not transfer, so the lower bound resets to 0.
    """
    if not isinstance(n, Integral) or n < 1:
        raise DomainError(f"level must be a positive integer, got {n!r}")
    if bound.constant is not None and bound.constant != level_label(n):
        raise DomainError(
            f"input bound tagged {bound.constant!r}, expected {level_label(n)!r}"
        )
    factor = 1 << n
    if _is_rational(bound.upper):
        scaled: Number = Fraction(bound.upper) * factor
    else:
        scaled = _ctx_up().mul(bound.upper, factor)
    upper = scaled if scaled < 1 else 1
    return CapacityBound(
        0, upper,
        bound.derivation + (f"branch-pullback(n={n})",),
        intermediate_label(n),
    )


# ---------------------------------------------------------------------------
# Large-deviation forms for counting bad branches


def large_deviation_bound(m, k, q: Number, n) -> Number:
    """Upper bound for the capacity of the set of m-step itineraries
    hitting a bad index set at least k times, when a single step is
    bad with capacity at most q at rung n:

        min(1, C(m, k) * (2^n * q)**k)

    The closed form survives the branch-pullback recursion exactly
    (Pascal's identity), which is what makes it usable at every level.
    """
    if not isinstance(m, Integral) or m < 1:
        raise DomainError(f"pattern length must be a positive integer, got {m!r}")
    if not isinstance(k, Integral) or not 0 <= k <= m:
        raise DomainError(f"count k must be an integer in [0, {m}], got {k!r}")
    if not isinstance(n, Integral) or n < 1:
        raise DomainError(f"level must be a positive integer, got {n!r}")
    if not 0 <= q <= 1:
        raise DomainError(f"per-step bound must lie in [0, 1], got {q!r}")
    if k == 0:
        return 1
    coefficient = math.comb(int(m), int(k))
    if _is_rational(q):
        value = coefficient * (Fraction(q) * (1 << n)) ** int(k)
        return value if value < 1 else 1
    up = _ctx_up()
    value = up.mul(coefficient, _pow_directed(up.mul(q, 1 << n), int(k), upward=True))
    return value if value < 1 else 1


def stirling_form(m, q: Number) -> Number:
    """The binomial coefficient bound C(m, q*m) < (3/q)**(q*m).

    Exact rational when q*m is an integer and q is rational; otherwise
    an mpfr rounded up.
    """
    if not isinstance(m, Integral) or m < 1:
        raise DomainError(f"pattern length must be a positive integer, got {m!r}")
    if not 0 < q <= 1:
        raise DomainError(f"density must lie in (0, 1], got {q!r}")
    if _is_rational(q):
        exponent = Fraction(q) * int(m)
        if exponent.denominator == 1:
            return (3 / Fraction(q)) ** int(exponent)
    up = _ctx_up()
    return _pow_directed(up.div(3, q), up.mul(q, int(m)), upward=True)


def sparse_form(m, q: Number, n) -> Number:
    """The combined large-deviation estimate (1/2)**(6 * 2^n * q * m),
    bounding the capacity of itineraries whose bad-index count reaches
    the 6*2^n*q fraction of m. Valid as a capacity statement when q
    dominates the per-step capacity at rung n."""
    if not isinstance(m, Integral) or m < 1:
        raise DomainError(f"pattern length must be a positive integer, got {m!r}")
    if not isinstance(n, Integral) or n < 1:
        raise DomainError(f"level must be a positive integer, got {n!r}")
    if not 0 <= q <= 1:
        raise DomainError(f"density must lie in [0, 1], got {q!r}")
    if _is_rational(q):
        exponent = Fraction(q) * (6 * (1 << n) * int(m))
        if exponent.denominator == 1 and exponent <= _EXACT_POW2_CAP:
            return Fraction(1, 2 ** int(exponent))
    down = _ctx_down()
    e = down.mul(6 * (1 << n) * int(m), q)
    return _ctx_up().exp2(_ctx_up().minus(e))


def tail_sum(q: Number, n) -> Number:
    """Upper bound for the summed sparse estimates over all pattern
    lengths past q**-2:

        2**-n * q**-1 * (1/2)**(6 * 2^n / q)

    Only meaningful in the sparse regime 1/q > 6*2^n; outside it the
    estimate does not hold and DomainError is raised.
    """
    if not isinstance(n, Integral) or n < 1:
        raise DomainError(f"level must be a positive integer, got {n!r}")
    if not 0 < q < 1:
        raise DomainError(f"density must lie in (0, 1), got {q!r}")
    threshold = 6 * (1 << n)
    if not (1 / Fraction(q) if _is_rational(q) else 1 / q) > threshold:
        raise DomainError(
            f"tail estimate needs 1/q > {threshold}, got q={q!r}"
        )
    if _is_rational(q):
        inverse = 1 / Fraction(q)
        exponent = threshold * inverse
        if exponent.denominator == 1 and exponent <= _EXACT_POW2_CAP:
            return inverse * Fraction(1, 2 ** (int(exponent) + n))
    up = _ctx_up()
    inverse_up = up.div(1, q)
    e = _ctx_down().mul(threshold, _ctx_down().div(1, q))
    power = up.exp2(up.minus(e))
    return up.mul(up.mul(up.exp2(-n), inverse_up), power)
