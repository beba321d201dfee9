"""Double-precision oracles for the first-return tower tests.

Everything here runs in plain Python floats and is only trusted at
shallow levels, where 53 bits dwarf the interval sizes involved. The
package under test is never imported.
"""

import math


def fixed_point(a):
    """The orientation-reversing fixed point, a > 3/4."""
    return (-1.0 + math.sqrt(1.0 + 4.0 * a)) / 2.0


def beta(a):
    return (-1.0 - math.sqrt(1.0 + 4.0 * a)) / 2.0


def float_nest(a, max_level, step_budget=2_000_000):
    """Forward-scan / square-root-pullback tower in doubles.

    Builds radii b_0..b_{max_level}. The landing scan for the first
    return time into level k+1 only runs when a deeper interval needs
    it, mirroring the engine. Raises RuntimeError on budget exhaustion
    and ValueError when twelve consecutive central levels suggest a
    restrictive interval.
    """
    p = fixed_point(a)
    b = [p]
    v = []          # v[k] = first return time of 0 into I_k (None if unknown)
    central = []    # central[k] for k < max_level
    crit_return = []
    x = 0.0
    orbit_signs = []  # sign of x_m for m = 1, 2, ...
    m = 0

    def advance():
        nonlocal x, m
        x = a - x * x
        m += 1
        orbit_signs.append(1 if x > 0 else -1)

    # v_0 by direct scan
    while True:
        advance()
        if m > step_budget:
            raise RuntimeError("no return to I_0 within budget")
        if abs(x) <= b[0]:
            break
    v.append(m)
    crit_return.append(x)

    central_run = 0
    for level in range(max_level):
        vn = v[level]
        # pull [-b, b] back along orbit signs sigma_1..sigma_{vn-1}
        lo, hi = -b[level], b[level]
        for k in range(vn - 1, 0, -1):
            sgn = orbit_signs[k - 1]  # sign of x_k
            lo2, hi2 = math.sqrt(max(a - hi, 0.0)), math.sqrt(a - lo)
            lo, hi = (lo2, hi2) if sgn > 0 else (-hi2, -lo2)
        # fold: new radius
        s = math.sqrt(a - lo)
        b.append(s)
        if abs(crit_return[level]) <= s:
            central.append(True)
            central_run += 1
            if central_run >= 12:
                raise ValueError(f"renormalization suspected, period {vn}")
            v.append(vn)
            crit_return.append(crit_return[level])
        else:
            central.append(False)
            central_run = 0
            if level + 1 >= max_level:
                v.append(None)
                crit_return.append(None)
                break
            # landing scan: continue the orbit to the next entry into [-s, s]
            while True:
                advance()
                if m - vn > step_budget:
                    raise RuntimeError("no landing within budget")
                if abs(x) <= s:
                    break
            v.append(m)
            crit_return.append(x)
    return {"b": b, "v": v, "central": central, "crit_return": crit_return}


def landing_count(a, nest_data, level, x, step_budget=1_000_000):
    """Number of non-central returns to level `level` before the orbit
    of x enters the next-level interval, and the total step count."""
    b = nest_data["b"][level]
    s = nest_data["b"][level + 1]
    if abs(x) <= s:
        return 0, 0
    steps = 0
    hops = 0
    while True:
        x = a - x * x
        steps += 1
        if steps > step_budget:
            raise RuntimeError("no landing within budget")
        if abs(x) <= b:
            if abs(x) <= s:
                return hops, steps
            hops += 1


def return_time(a, radius, x, step_budget=1_000_000):
    """First return time of x into [-radius, radius]."""
    steps = 0
    while True:
        x = a - x * x
        steps += 1
        if steps > step_budget:
            raise RuntimeError("no return within budget")
        if abs(x) <= radius:
            return steps


def two_cycle_points(a):
    """The period-two orbit, a > 3/4."""
    d = math.sqrt(4.0 * a - 3.0)
    return (1.0 + d) / 2.0, (1.0 - d) / 2.0


def interval_image(a, lo, hi):
    """Exact image of [lo, hi] under x -> a - x^2."""
    flo, fhi = a - lo * lo, a - hi * hi
    if lo <= 0.0 <= hi:
        return min(flo, fhi), a
    return (min(flo, fhi), max(flo, fhi))


def renorm_check(a, q, period):
    """Verify [-q, q] is restrictive of the given period: iterates stay
    off (-q, q) until step `period`, which maps into [-q, q]."""
    lo, hi = -q, q
    for j in range(1, period + 1):
        lo, hi = interval_image(a, lo, hi)
        if j < period:
            if not (hi <= -q + 1e-12 or lo >= q - 1e-12):
                return False
    return -q - 1e-9 <= lo and hi <= q + 1e-9


def superstable_parameters(k_max):
    """Parameters with superstable orbits of period 2^k, k = 0..k_max,
    by grid scan plus bisection on f^{2^k}(0). Each search window is
    sized from the previous cascade gap so the grid cannot skip over
    the accumulation point into the chaotic regime."""
    def crit_iter(a, n):
        x = 0.0
        for _ in range(n):
            x = a - x * x
        return x

    values = [0.0]  # superstable fixed point: f(0) = a = 0
    for k in range(1, k_max + 1):
        period = 2 ** k
        lo = values[-1] + 1e-12
        if k <= 2:
            hi = 2.0
        else:
            hi = min(2.0, values[-1] + 2.0 * (values[-1] - values[-2]))
        steps = 4096
        prev = crit_iter(lo, period)
        found = None
        for i in range(1, steps + 1):
            t = lo + (hi - lo) * i / steps
            cur = crit_iter(t, period)
            if (prev < 0) != (cur < 0):
                found = (lo + (hi - lo) * (i - 1) / steps, t)
                break
            prev = cur
        if found is None:
            raise RuntimeError(f"no sign change for period {period}")
        u, w = found
        for _ in range(200):
            mid = 0.5 * (u + w)
            if (crit_iter(u, period) < 0) != (crit_iter(mid, period) < 0):
                w = mid
            else:
                u = mid
        values.append(0.5 * (u + w))
    return values


def markov_pieces(a, hole_radius, target, depth, dedup=1e-11):
    """Brute-force piece count: preimages of `target` to the given
    depth, kept when inside the invariant interval and never entering
    the open hole (-hole_radius, hole_radius) on the way forward, then
    components of the complement. Returns (sorted cut points, count)."""
    lo_I = beta(a)
    hi_I = -lo_I
    frontier = [target]
    kept = {target}
    for _ in range(depth):
        nxt = []
        for y in frontier:
            r = a - y
            if r < 0.0:
                continue
            root = math.sqrt(r)
            for x in (root, -root):
                if lo_I - 1e-12 <= x <= hi_I + 1e-12:
                    if abs(x) < hole_radius - 1e-12:
                        continue  # enters the hole at time zero
                    nxt.append(x)
                    kept.add(x)
        frontier = nxt
    pts = sorted(kept)
    merged = []
    for x in pts:
        if not merged or x - merged[-1] > dedup:
            merged.append(x)
    # components of [lo_I, hi_I] minus cuts minus the hole
    cuts = [lo_I] + merged + [hi_I]
    count = 0
    for u, w in zip(cuts[:-1], cuts[1:]):
        if w - u <= dedup:
            continue
        if u >= -hole_radius - 1e-12 and w <= hole_radius + 1e-12:
            continue  # the hole itself
        count += 1
    return merged, count


# ---------------------------------------------------------------------------
# extended-precision forward oracles
#
# A chaotic orbit roughly doubles its rounding error every step, so the
# double-precision scans above stop being trustworthy after about fifty
# steps. Deep return times, landing counts, and branch domains are
# cross-checked with the same forward-scan recipe run in mpmath at a few
# hundred bits. mpmath shares no code with the arithmetic under test.

from mpmath import mp, mpf
from mpmath import sqrt as _mp_sqrt


def _mp_pull(a, lo, hi, signs_inner):
    """Pull [lo, hi] back along a sign trail, most recent step last."""
    for sgn in reversed(signs_inner):
        rlo = _mp_sqrt(a - hi)
        rhi = _mp_sqrt(a - lo)
        if sgn > 0:
            lo, hi = rlo, rhi
        else:
            lo, hi = -rhi, -rlo
    return lo, hi


def mp_nest(a, max_level, prec=700, step_budget=100_000):
    """mpmath analog of float_nest; also records per-level landing hop
    counts for the critical value. `a` should be a string."""
    with mp.workprec(prec):
        av = mpf(a)
        p = (-1 + _mp_sqrt(1 + 4 * av)) / 2
        b = [p]
        v = []
        central = []
        crit_return = []
        hops = {}
        landing = {}
        signs = []
        x = mpf(0)
        m = 0

        def advance():
            nonlocal x, m
            x = av - x * x
            m += 1
            signs.append(1 if x > 0 else -1)

        while True:
            advance()
            if m > step_budget:
                raise RuntimeError("no return to I_0 within budget")
            if abs(x) <= b[0]:
                break
        v.append(m)
        crit_return.append(x)

        central_run = 0
        for level in range(max_level):
            vn = v[level]
            lo, hi = -b[level], b[level]
            lo, hi = _mp_pull(av, lo, hi, signs[:vn - 1])
            s = _mp_sqrt(av - lo)
            b.append(s)
            if abs(crit_return[level]) <= s:
                central.append(True)
                v.append(vn)
                crit_return.append(crit_return[level])
                central_run += 1
                if central_run >= 12:
                    raise ValueError(
                        f"renormalization suspected, period {vn}")
                continue
            central_run = 0
            central.append(False)
            if level + 1 >= max_level:
                v.append(None)
                crit_return.append(None)
                break
            start = m
            count = 0
            while True:
                advance()
                if m - start > step_budget:
                    raise RuntimeError("no landing within budget")
                if abs(x) <= b[level]:
                    count += 1
                    if abs(x) <= s:
                        break
            hops[level] = count
            landing[level] = m - start
            v.append(m)
            crit_return.append(x)
        return {"b": b, "v": v, "central": central,
                "crit_return": crit_return, "hops": hops,
                "landing": landing}


def mp_first_return(a, radius, x0, prec=700, budget=100_000):
    """(steps, sign trail, final point) of the first return of x0 into
    [-radius, radius]. radius and x0 should be strings or mpf built at
    the working precision."""
    with mp.workprec(prec):
        av = mpf(a)
        r = mpf(radius)
        x = mpf(x0)
        trail = [1 if x > 0 else -1]
        steps = 0
        while True:
            x = av - x * x
            steps += 1
            if steps > budget:
                raise RuntimeError("no return within budget")
            if abs(x) <= r:
                return steps, trail, x
            trail.append(1 if x > 0 else -1)


def mp_branch_domain(a, radius, x0, prec=700, budget=100_000):
    """(return time, domain lo, domain hi) of the return branch of
    [-radius, radius] containing x0."""
    with mp.workprec(prec):
        av = mpf(a)
        r = mpf(radius)
        steps, trail, _ = mp_first_return(a, radius, x0, prec, budget)
        lo, hi = _mp_pull(av, -r, r, trail)
        return steps, lo, hi


def mp_landing_scan(a, outer_radius, inner_radius, x0,
                    prec=700, budget=100_000):
    """(hop count, total steps) for x0 riding returns to the outer
    interval until it enters the inner one."""
    with mp.workprec(prec):
        av = mpf(a)
        bo = mpf(outer_radius)
        bi = mpf(inner_radius)
        x = mpf(x0)
        steps = 0
        count = 0
        while True:
            x = av - x * x
            steps += 1
            if steps > budget:
                raise RuntimeError("no landing within budget")
            if abs(x) <= bo:
                count += 1
                if abs(x) <= bi:
                    return count, steps
