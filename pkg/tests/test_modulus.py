import random
from fractions import Fraction as F
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import nondecreasing_moduli, pl_functions, rationals
from metcodec.corpus import generate
from metcodec.modulus import (
    concave_majorant,
    exact_concave_majorant,
    grid_slope_bound,
    lipschitz_approx,
    monotone_envelope,
)
from metcodec.numerics import PLFunction
from metcodec.structures import FinitePresentation, PredicateSymbol, Signature


def brute_alpha(delta, n):
    """Minimum of ``m x + b`` over the vertices of the feasible ``(m, b)`` region:
    intersections of two grid constraints, or one constraint with ``m = 0`` or
    ``b = 0``, plus the origin."""
    size = 2 ** n
    pts = [(F(k, size), delta(F(k, size))) for k in range(size + 1)]
    cands = {(F(0), F(0))}
    for x, y in pts:
        cands.add((F(0), y))
        if x:
            cands.add((y / x, F(0)))
    for (x1, y1), (x2, y2) in product(pts, pts):
        if x1 < x2:
            m = (y2 - y1) / (x2 - x1)
            cands.add((m, y1 - m * x1))
    feasible = [(m, b) for m, b in cands if m >= 0 and b >= 0 and all(m * x + b >= y for x, y in pts)]
    return lambda x: min(m * x + b for m, b in feasible)


def is_concave_nondecreasing(f):
    s = f.slopes()
    return all(v >= 0 for v in s) and all(a >= b for a, b in zip(s, s[1:]))


def test_monotone_envelope_examples():
    f = PLFunction(((0, 0), (F(1, 2), 1), (1, 0)))
    assert monotone_envelope(f).points == ((0, 0), (F(1, 2), 1), (1, 1))
    assert monotone_envelope(PLFunction.constant(0)) == PLFunction.constant(0)
    g = PLFunction.linear(2)
    assert monotone_envelope(g) == g


@given(pl_functions(), rationals(128))
def test_monotone_envelope_is_running_max(f, x):
    env = monotone_envelope(f)
    assert env.is_nondecreasing()
    grid = [F(k, 128) for k in range(129) if F(k, 128) <= x] + [y for y in f.xs if y <= x]
    assert env(x) == max(f(y) for y in grid)


def test_majorant_examples():
    zero = concave_majorant(PLFunction.constant(0), 3)
    assert zero.alpha_n == PLFunction.constant(0)
    conc = PLFunction.linear(2)
    r = concave_majorant(conc, 1)
    assert all(r.alpha_n(x) == conc(x) for x in (0, F(1, 2), 1))
    assert concave_majorant(conc, 4).alpha_n == conc
    with pytest.raises(ValueError):
        concave_majorant(PLFunction.constant(F(1, 2)), 2)


def test_square_majorant_is_near_identity():
    sq = PLFunction.from_samples(lambda x: x * x, 10)
    r = concave_majorant(sq, 10)
    rng = random.Random(1)
    probes = [F(rng.randint(0, 10 ** 6), 10 ** 6) for _ in range(200)]
    assert max(abs(r.alpha_n(x) - x) for x in probes) <= F(1, 2 ** 8)


@settings(max_examples=40)
@given(nondecreasing_moduli(), st.integers(0, 4))
def test_majorant_matches_brute_force(delta, n):
    r = concave_majorant(delta, n)
    brute = brute_alpha(delta, n)
    for k in range(33):
        x = F(k, 32)
        assert r.alpha_n(x) == brute(x)


@settings(max_examples=40)
@given(pl_functions(zero_at_zero=True), st.integers(0, 6))
def test_majorant_shape_and_gap(delta, n):
    r = concave_majorant(delta, n)
    assert r.alpha_n(0) == 0
    assert is_concave_nondecreasing(r.alpha_n)
    assert r.certified_gap == 2 * r.modulus(F(1, 2 ** n))
    alpha = exact_concave_majorant(delta)
    for x in alpha.xs + r.alpha_n.xs:
        assert r.alpha_n(x) <= alpha(x) <= r.alpha_n(x) + r.certified_gap
    # the steepest slope never exceeds the grid difference bound
    assert max(r.alpha_n.slopes()) <= grid_slope_bound(delta, n)


@settings(max_examples=25)
@given(pl_functions(zero_at_zero=True), st.integers(0, 5), st.integers(0, 3))
def test_sandwich_under_refinement(delta, n, extra):
    m = n + extra
    an = concave_majorant(delta, n)
    am = concave_majorant(delta, m).alpha_n
    for x in an.alpha_n.xs + am.xs:
        assert an.alpha_n(x) <= am(x) <= an.alpha_n(x) + an.certified_gap


# -- Lipschitz approximations -------------------------------------------------

def unary(points, m, values):
    sig = Signature(("O",), {"f": PredicateSymbol(("O",), PLFunction.identity())}, "O")
    return FinitePresentation(sig, {"O": points}, {"O": m}, {"f": {(p,): v for p, v in zip(points, values)}})


def test_lipschitz_approx_examples():
    s = unary(["a", "b"], [[0, 1], [1, 0]], [F(0), F(1)])
    f2 = lipschitz_approx(s, "f", 2)
    assert f2 == {("a",): 0, ("b",): F(1, 2)}
    z = unary(["a", "b"], [[0, 1], [1, 0]], [F(0), F(0)])
    assert set(lipschitz_approx(z, "f", 3).values()) == {0}
    with pytest.raises(ValueError):
        lipschitz_approx(s, "f", 0)


@pytest.mark.parametrize("seed", range(10))
def test_lipschitz_approx_properties(seed):
    s = generate(seed, 1)[0]
    for name, sym in s.signature.predicates.items():
        f = s.predicates[name]
        for n in (1, 2, 5, 8):
            fn = lipschitz_approx(s, name, n)
            for x in fn:
                assert n * fn[x] <= f[x]
                for y in fn:
                    assert abs(fn[x] - fn[y]) <= s.tuple_dist(sym.arity, x, y)
