"""Tests for the arbitrary-precision kernel.

Expected decimals below were computed independently with mpmath at 85 digits
and frozen; the package itself never touches mpmath.
"""

import random

import gmpy2
import pytest
from gmpy2 import mpfr

from quadlab import errors
from quadlab.core import (
    DEFAULT_PRECISION,
    compare_with_margin,
    decimal_string,
    evaluate_orbit,
    family,
    hp,
    invariant_interval,
    make_context,
    orientation_reversing_fixed_point,
    parse_decimal,
    precision_ladder_report,
    pullback_chain,
    solve_monotone_pullback,
)

P_1P25 = "0.7247448713915890490986420373529456959829737403283350642163462836254801887286575132699"
LN16 = "2.772588722239781237668928485832706272302000537441021016482720037973574487878778862423"
SQRT2 = "1.41421356237309504880168872420969807856967187537694807317667973799073247846210703885"


def close(x, frozen, bits=200):
    return abs(x - mpfr(frozen, 300)) < gmpy2.exp2(mpfr(-bits))


class TestFamilyConstruction:
    def test_invariant_interval_a2(self):
        lo, hi = invariant_interval("2")
        assert lo == -2 and hi == 2

    def test_invariant_interval_quarter(self):
        lo, hi = invariant_interval("-0.25")
        assert lo == mpfr("-0.5") and hi == mpfr("0.5")

    def test_beta_at_most_minus_half(self):
        rng = random.Random(7)
        for _ in range(50):
            a = rng.uniform(-0.25, 2.0)
            lo, _hi = invariant_interval(a)
            assert lo <= mpfr("-0.5")

    def test_out_of_range(self):
        for bad in ("2.0000001", "-0.2500001", "3", "-1"):
            with pytest.raises(errors.ParameterOutOfRange):
                family(bad)

    def test_endpoint_parameters_accepted(self):
        family("2")
        family("-0.25")

    def test_map_preserves_interval_endpoints(self):
        m = family("1.7")
        assert abs(m.step(m.beta) - m.beta) <= m.escape_tolerance()
        assert abs(m.step(m.upper) - m.beta) <= m.escape_tolerance()


class TestFixedPoint:
    def test_value_at_1p25(self):
        p = orientation_reversing_fixed_point("1.25")
        assert close(p, P_1P25)

    def test_multiplier_below_minus_one(self):
        for a in ("0.76", "1.1", "1.7", "2"):
            p = orientation_reversing_fixed_point(a)
            m = family(a)
            assert m.derivative(p) < -1

    def test_boundary_and_below(self):
        with pytest.raises(errors.NonHyperbolicBoundary):
            orientation_reversing_fixed_point("0.75")
        with pytest.raises(errors.NotDefined):
            orientation_reversing_fixed_point("0.5")
        with pytest.raises(errors.NotDefined):
            orientation_reversing_fixed_point("-0.1")


class TestOrbit:
    def test_a2_critical_orbit(self):
        rec = evaluate_orbit("2", 0, 6)
        assert [float(x) for x in rec.points] == [0.0, 2.0, -2.0, -2.0, -2.0, -2.0, -2.0]

    def test_log_derivative_ln16(self):
        rec = evaluate_orbit("2", 2, 2)
        assert close(rec.log_derivative(2), LN16)

    def test_log_derivative_identity_vs_product(self):
        # exp of the accumulated log sums must match the direct product to
        # within 1 part in 2^(p/2)
        rng = random.Random(11)
        for _ in range(25):
            a = rng.uniform(1.4, 2.0)
            x0 = rng.uniform(-0.9, 0.9)
            n = rng.randrange(5, 60)
            rec = evaluate_orbit(a, x0, n)
            m = family(a)
            ctx = m.ctx
            prod = hp(1, m.precision)
            for k in range(n):
                prod = ctx.mul(prod, ctx.abs(m.derivative(rec.points[k])))
            if prod == 0:
                continue
            ratio = ctx.div(ctx.exp(rec.log_derivative(n)), prod)
            assert ctx.abs(ctx.sub(ratio, hp(1, m.precision))) < gmpy2.exp2(
                mpfr(-m.precision // 2))

    def test_reproducible_bit_for_bit(self):
        r1 = evaluate_orbit("1.7", 0, 200, 192)
        r2 = evaluate_orbit("1.7", 0, 200, 192)
        assert all(decimal_string(x) == decimal_string(y)
                   for x, y in zip(r1.points, r2.points))
        assert all(x.precision == 192 for x in r1.points)

    def test_x0_outside_interval(self):
        with pytest.raises(errors.EscapedInterval):
            evaluate_orbit("2", "2.1", 3)

    def test_precision_cap(self):
        with pytest.raises(errors.PrecisionExhausted):
            evaluate_orbit("1.7", 0, 3, precision=512, precision_max=256)

    def test_superstable_orbit_log_derivative_is_minus_inf(self):
        rec = evaluate_orbit("1", 0, 4)
        assert rec.log_derivative(1) == mpfr("-inf")
        assert [round(float(x), 12) for x in rec.points] == [0.0, 1.0, 0.0, 1.0, 0.0]

    def test_proximity_tracking(self):
        rec = evaluate_orbit("1.7", 0, 40)
        m = family("1.7")
        ctx = m.ctx
        expect_min = min((ctx.abs(x) for x in rec.points[1:]), key=float)
        assert rec.min_abs == expect_min
        expect_margin = min(
            (ctx.sub(m.upper, ctx.abs(x)) for x in rec.points[1:]), key=float)
        assert rec.boundary_margin == expect_margin


class TestPrecisionLadder:
    @pytest.mark.parametrize("a,n", [("1.7", 100), ("1.99", 100), ("0.3", 50)])
    def test_bound_met(self, a, n):
        rep = precision_ladder_report(a, 0, n)
        assert rep.bound_met
        assert rep.first_violation is None

    def test_deviation_grows_but_stays_inside(self):
        rep = precision_ladder_report("1.9", 0, 150, 128)
        assert rep.bound_met
        assert rep.max_relative_deviation < 1.0


class TestPullbackSolve:
    def test_sqrt2(self):
        x = solve_monotone_pullback("2", [1], 0, (1, 2))
        assert close(x, SQRT2)

    def test_bad_bracket(self):
        with pytest.raises(errors.BracketInvalid):
            solve_monotone_pullback("2", [1], 0, (1.5, 2))

    def test_bracket_must_be_ordered(self):
        with pytest.raises(errors.BracketInvalid):
            solve_monotone_pullback("2", [1], 0, (2, 1))

    def test_round_trip_thousand_random_itineraries(self):
        # pull a pushed-forward point back through its own branch, then push
        # forward again; must land within 2^(-p/2)*|I|
        rng = random.Random(20260822)
        done = 0
        while done < 1000:
            a = rng.uniform(1.2, 2.0)
            m = family(a)
            steps = rng.randrange(1, 21)
            x0 = mpfr(rng.uniform(-0.8, 0.8), m.precision)
            pts = [x0]
            ok = True
            x = x0
            for _ in range(steps):
                if abs(x) < mpfr("0.02"):
                    ok = False
                    break
                x = m.step(x)
                pts.append(x)
            if not ok or not m.contains(pts[-1]):
                continue
            signs = [1 if v > 0 else -1 for v in pts[:-1]]
            target = pts[-1]
            h = mpfr("1e-9")
            bracket = (x0 - h, x0 + h)
            try:
                sol = solve_monotone_pullback(a, signs, target, bracket,
                                              m.precision)
            except errors.BracketInvalid:
                continue
            resid, _ = _push_forward(m, sol, steps, target)
            assert abs(resid) <= m.escape_tolerance()
            # agreement with the closed-form chain inverse
            chain = pullback_chain(m, signs, target)
            assert abs(chain[0] - sol) < mpfr("1e-30")
            done += 1
        assert done == 1000

    def test_chain_inverse_reproduces_orbit(self):
        m = family("1.8")
        rec = evaluate_orbit("1.8", "0.41", 12)
        signs = [1 if v > 0 else -1 for v in rec.points[:-1]]
        chain = pullback_chain(m, signs, rec.points[-1])
        for mine, ref in zip(chain, rec.points):
            assert abs(mine - ref) < gmpy2.exp2(mpfr(-200))


def _push_forward(m, x, steps, target):
    v = x
    for _ in range(steps):
        v = m.step(v)
    return v - target, v


class TestSerialization:
    def test_round_trip_random(self):
        rng = random.Random(3)
        for _ in range(200):
            prec = rng.choice([53, 64, 100, 256, 300])
            x = mpfr(rng.uniform(-2, 2), prec)
            s = decimal_string(x)
            y = parse_decimal(s, prec)
            assert x == y and y.precision == prec

    def test_round_trip_tiny_and_zero(self):
        for s0 in ("0", "1e-200", "-3.5e-300"):
            x = mpfr(s0, 256)
            assert parse_decimal(decimal_string(x), 256) == x

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            decimal_string(mpfr("inf"))


class TestCompareWithMargin:
    def test_three_way(self):
        ctx = make_context(128)
        one = hp(1, 128)
        eps = gmpy2.exp2(mpfr(-100))
        near = ctx.add(one, gmpy2.exp2(mpfr(-120)))
        assert compare_with_margin(one, near, eps) == 0
        assert compare_with_margin(one, ctx.add(one, ctx.mul(eps, hp(4, 128))), eps) == -1
        assert compare_with_margin(ctx.add(one, ctx.mul(eps, hp(4, 128))), one, eps) == 1
