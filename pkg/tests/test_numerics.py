from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import pl_functions, rationals
from metcodec.numerics import (
    DomainError,
    IntervalValue,
    PLFunction,
    as_rational,
    delta_star,
    format_rational,
    is_dyadic,
    pl_combine,
    pow2,
    tail_sum,
    to_dyadic,
    tsub,
)

probe = rationals(256)


def test_as_rational_reads_strings_and_refuses_floats():
    assert as_rational("3/4") == F(3, 4)
    assert as_rational(" -2 ") == F(-2)
    assert as_rational(5) == F(5)
    with pytest.raises(TypeError):
        as_rational(0.5)
    with pytest.raises(TypeError):
        as_rational(True)


def test_format_always_writes_denominator():
    assert format_rational(F(1)) == "1/1"
    assert format_rational(F(-6, 4)) == "-3/2"


@given(st.fractions())
def test_format_round_trips(q):
    assert as_rational(format_rational(q)) == q


def test_tsub_and_pow2():
    assert tsub(F(1), F(3)) == 0
    assert tsub(F(3), F(1)) == 2
    assert pow2(-3) == F(1, 8)
    assert pow2(4) == 16


@given(st.fractions(), st.integers(0, 40))
def test_to_dyadic_is_within_half_ulp(q, k):
    r = to_dyadic(q, k)
    assert is_dyadic(r)
    assert abs(r - q) <= pow2(-k - 1)


# -- intervals ---------------------------------------------------------------

def test_interval_basics():
    a = IntervalValue(F(1), F(1, 4))
    assert a.lo == F(3, 4) and a.hi == F(5, 4)
    assert a.contains(F(5, 4)) and not a.contains(F(2))
    assert IntervalValue.from_bounds(F(0), F(1)) == IntervalValue(F(1, 2), F(1, 2))
    assert (a + a).radius == F(1, 2)
    assert abs(IntervalValue(F(0), F(1))).lo == 0
    with pytest.raises(ValueError):
        IntervalValue(F(0), F(-1))


@given(rationals(16, -2, 2), rationals(16, 0, 1), rationals(16, -2, 2), rationals(16, 0, 1),
       rationals(16, 0, 1), rationals(16, 0, 1))
def test_interval_arithmetic_encloses(c1, r1, c2, r2, t1, t2):
    a, b = IntervalValue(c1, r1), IntervalValue(c2, r2)
    x = a.lo + t1 * (a.hi - a.lo)
    y = b.lo + t2 * (b.hi - b.lo)
    assert (a + b).contains(x + y)
    assert (a - b).contains(x - y)
    assert abs(a).contains(abs(x))
    assert a.scale(F(-3)).contains(-3 * x)


# -- piecewise-linear functions -----------------------------------------------

def test_pl_validation():
    with pytest.raises(ValueError):
        PLFunction(((F(0), F(0)),))
    with pytest.raises(ValueError):
        PLFunction(((F(0), F(0)), (F(1, 2), F(0))))
    with pytest.raises(ValueError):
        PLFunction(((F(0), F(0)), (F(1, 2), F(0)), (F(1, 2), F(1)), (F(1), F(1))))
    with pytest.raises(DomainError):
        PLFunction.identity()(F(3, 2))


def test_pl_frozen_values():
    f = PLFunction.linear(2)
    assert f(F(1, 4)) == F(1, 2) and f(F(3, 4)) == 1
    assert f.points == ((0, 0), (F(1, 2), 1), (1, 1))
    g = PLFunction(((0, 0), (F(1, 4), F(1, 8)), (F(1, 2), F(3, 4)), (1, 1)))
    assert not g.is_concave() and g.is_nondecreasing()
    assert g.lipschitz_constant() == F(5, 2)
    assert PLFunction(((0, 0), (F(1, 2), F(1, 2)), (1, 1))) == PLFunction.identity()


def test_delta_star_frozen():
    # N = 1, delta = identity: min(max(min(2x, 1), 4x), 1) = min(4x, 1)
    assert delta_star(PLFunction.identity(), 1) == PLFunction.linear(4)
    # N = 0 leaves a 2x floor under a flat modulus
    flat = PLFunction(((0, 0), (F(1, 8), F(1, 2)), (1, F(1, 2))))
    ds = delta_star(flat, 0)
    assert ds(F(1, 8)) == F(1, 2) and ds(F(1, 2)) == 1


@given(pl_functions(), pl_functions(), probe)
def test_min_max_pointwise(f, g, x):
    assert f.min(g)(x) == min(f(x), g(x))
    assert f.max(g)(x) == max(f(x), g(x))


@given(pl_functions(), pl_functions(), probe, rationals(8, -2, 2))
def test_sum_scale_pointwise(f, g, x, q):
    assert (f + g)(x) == f(x) + g(x)
    assert f.scale(q)(x) == q * f(x)


@given(pl_functions(), rationals(8), probe)
def test_tsub_clamp_pointwise(f, c, x):
    assert f.tsub(c)(x) == tsub(f(x), c)
    g = f.scale(3) + PLFunction.constant(F(-1))
    assert g.clamp()(x) == min(max(g(x), 0), 1)


@given(pl_functions(), pl_functions(), probe)
def test_compose_pointwise(f, g, x):
    assert f.compose(g)(x) == f(g(x))


@given(pl_functions(), pl_functions())
def test_closure_keeps_unit_range(f, g):
    for h in (f.min(g), f.max(g), f.compose(g), f.tsub(F(1, 3)), f.scale(3).clamp()):
        assert h.is_unit_valued


@given(pl_functions())
def test_simplify_preserves_function(f):
    s = f.simplify()
    assert s == f
    assert len(s.points) <= len(f.points)
    assert all(s(x) == f(x) for x in f.xs)


@given(pl_functions())
def test_json_round_trip(f):
    assert PLFunction.from_json(f.to_json()).points == f.points


def test_pl_combine_dispatch():
    f = PLFunction.identity()
    assert pl_combine("scale", f, F(1, 2))(1) == F(1, 2)
    assert pl_combine("clamp", f.scale(2))(1) == 1
    with pytest.raises(ValueError):
        pl_combine("bogus", f, f)


def test_tail_sum_bounds():
    fs = [PLFunction.identity()] * 3
    partial, bound = tail_sum(fs, 2)
    assert partial(1) == F(3, 4) and bound == F(1, 4)
    full, bound = tail_sum(fs)
    assert full(1) == F(7, 8) and bound == F(1, 8)
    with pytest.raises(ValueError):
        tail_sum([PLFunction.constant(2)])
