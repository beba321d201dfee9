"""Independent oracles for the capacity-calculus tests.

Nothing here imports the package under test. The piecewise-linear family
brute-forces image ratios in plain floats; the Bernstein helpers count
bad-index patterns exactly in integer arithmetic.
"""

from fractions import Fraction

# --------------------------------------------------------------------------
# A 3-parameter family of increasing piecewise-linear maps of [0, 1]:
# first node at (u, s), second at ((1+u)/2, t) where t is chosen so the
# last two slopes have ratio lam. (u, u, 1.0) is the identity.

FAMILY_U = (0.25, 0.4, 0.5, 0.6, 0.75)
FAMILY_S = (0.3, 0.42, 0.5, 0.58, 0.7)
FAMILY_LAM = (0.6, 1.0, 1.65)


def pl_member(u, s, lam):
    v = (1.0 + u) / 2.0
    t = (lam + s) / (1.0 + lam)
    return (0.0, u, v, 1.0), (0.0, s, t, 1.0)


def pl_family():
    return [pl_member(u, s, lam)
            for u in FAMILY_U for s in FAMILY_S for lam in FAMILY_LAM]


def pl_eval(member, x):
    xs, ys = member
    for i in range(3):
        if x <= xs[i + 1]:
            width = xs[i + 1] - xs[i]
            return ys[i] + (ys[i + 1] - ys[i]) * ((x - xs[i]) / width)
    return ys[-1]


def holder_class_ok(member, k, grid=33):
    """True when the member satisfies the two-sided Holder sandwich at
    exponent k for every subinterval with endpoints on a uniform grid
    refined by the member's breakpoints."""
    pts = sorted(set(i / (grid - 1) for i in range(grid)) | set(member[0]))
    values = [pl_eval(member, p) for p in pts]
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            r = pts[j] - pts[i]
            image = values[j] - values[i]
            if image < (1.0 / k) * r ** k - 1e-12:
                return False
            if image > (k * r) ** (1.0 / k) + 1e-12:
                return False
    return True


def family_in_class(k, tighten=0.85):
    """Members passing the sandwich at a strictly smaller exponent, so
    grid gaps cannot smuggle in a map outside class k."""
    strict = 1.0 + tighten * (k - 1.0)
    return [m for m in pl_family() if holder_class_ok(m, strict)]


def sup_image_ratio(members, components):
    """Brute-force sup over the members of the total image length of
    the component list (the ambient [0, 1] maps onto itself)."""
    return max(
        sum(pl_eval(m, b) - pl_eval(m, a) for a, b in components)
        for m in members
    )


def random_components(rng, low=0.01, high=0.99):
    """One to three disjoint closed intervals with random float ends."""
    cuts = sorted(rng.uniform(low, high) for _ in range(rng.randrange(2, 7)))
    return tuple(
        (cuts[i], cuts[i + 1]) for i in range(0, len(cuts) - 1, 2)
    )


# --------------------------------------------------------------------------
# Exact pattern counting in the Bernstein basis. A vector c represents
# sum_j c[j] * t**j * (1-t)**(m-j); comparing such vectors coefficientwise
# proves polynomial inequalities for every t in [0, 1] at once.


def enumeration_bernstein(m, k):
    """Degree-m Bernstein coefficients of the exact probability that at
    least k of m independent t-events occur, by enumerating all 2^m
    outcome patterns."""
    coeffs = [0] * (m + 1)
    for mask in range(1 << m):
        j = bin(mask).count("1")
        if j >= k:
            coeffs[j] += 1
    return coeffs


def monomial_bernstein(coefficient, power, m):
    """coefficient * t**power written in the degree-m Bernstein basis,
    by multiplying in (t + (1-t)) one factor at a time."""
    coeffs = {power: Fraction(coefficient)}
    for _ in range(m - power):
        nxt = {}
        for p, c in coeffs.items():
            nxt[p + 1] = nxt.get(p + 1, Fraction(0)) + c
            nxt[p] = nxt.get(p, Fraction(0)) + c
        coeffs = nxt
    return [coeffs.get(j, Fraction(0)) for j in range(m + 1)]
