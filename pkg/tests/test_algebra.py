import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from pbnsynth.algebra import (
    AlgebraError,
    ParameterMismatch,
    ParameterSpace,
    PoleError,
    Polynomial,
    RationalFunction,
    Region,
    is_multi_affine,
    poly_add,
    poly_diff,
    poly_eval,
    poly_mul,
    region_split,
    region_vertices,
    render_polynomial,
    render_rational,
    rf_eval,
)

PS = ParameterSpace.from_bounds([("x1", 0, 1), ("x2", 0, 1), ("x3", 0, 1), ("x4", 0, 1)])
UNIT2 = ParameterSpace.from_bounds([("x1", 0, 1), ("x2", 0, 1)])
PQ = ParameterSpace.from_bounds([("p", F(1, 1000), F(999, 1000)), ("q", F(1, 1000), F(999, 1000))])


def var(ps, n):
    return Polynomial.variable(ps, n)


def const(ps, c):
    return Polynomial.constant(ps, c)


def test_add_complement_rows():
    x1 = var(UNIT2, "x1")
    assert poly_add(x1, 1 - x1) == const(UNIT2, 1)


def test_add_identity():
    s = var(UNIT2, "x1") + var(UNIT2, "x2")
    assert poly_add(s, const(UNIT2, 0)) == s


def test_add_keeps_distinct_terms():
    x1 = var(UNIT2, "x1")
    r = poly_add(2 * x1 ** 2, x1)
    assert len(r.terms) == 2
    assert r.terms[(2, 0)] == 2 and r.terms[(1, 0)] == 1


def test_mul_examples():
    x1, x2 = var(UNIT2, "x1"), var(UNIT2, "x2")
    assert poly_mul(x1, 1 - x1) == x1 - x1 ** 2
    assert poly_mul(const(UNIT2, 1), x2) == x2
    assert poly_mul(x1 + x2, x1 - x2) == x1 ** 2 - x2 ** 2


def test_mismatched_parameter_lists():
    with pytest.raises(ParameterMismatch):
        poly_add(var(UNIT2, "x1"), var(PQ, "p"))


def test_eval_examples():
    x1, x2 = var(UNIT2, "x1"), var(UNIT2, "x2")
    assert poly_eval(x1 + x2, (F(3, 10), F(4, 10))) == F(7, 10)
    assert poly_eval(2 * x1 ** 2, (F(1, 2), 0)) == F(1, 2)
    p = var(PQ, "p")
    assert poly_eval(1 - p, (F("0.36"), F("0.27"))) == F("0.64")


def test_diff_examples():
    x1, x2 = var(UNIT2, "x1"), var(UNIT2, "x2")
    assert poly_diff(x1 * (1 - x1), "x1") == 1 - 2 * x1
    assert poly_diff(x2, "x1").is_zero()
    assert poly_diff(2 * x1 ** 2, "x1") == 4 * x1


def test_rf_eval_examples():
    x1 = var(UNIT2, "x1")
    assert rf_eval(RationalFunction(x1), (F(1, 5), 0)) == F(1, 5)
    p, q = var(PQ, "p"), var(PQ, "q")
    num = F("0.87") * p * q
    f = RationalFunction(num, num + F("0.10378446"))
    assert abs(float(rf_eval(f, (F("0.36"), F("0.27")))) - 0.448976) < 1e-6
    assert abs(float(rf_eval(f, (F("0.110456"), F("0.27")))) - 0.2) < 1e-5


def test_rf_pole():
    x1 = var(UNIT2, "x1")
    f = RationalFunction(const(UNIT2, 1), x1)
    with pytest.raises(PoleError):
        f.eval((0, 0))


def test_denominator_is_normalised():
    x1 = var(UNIT2, "x1")
    f = RationalFunction(2 * x1, -4 * x1 - 2)
    assert f.denominator.leading_coefficient() == 1
    g = RationalFunction(x1, 2 * x1 + 1)
    assert f.same_function(-g)
    assert RationalFunction(x1, const(UNIT2, 4)).denominator == const(UNIT2, 1)


def test_is_multi_affine():
    x1, x2 = var(UNIT2, "x1"), var(UNIT2, "x2")
    assert is_multi_affine(x1 + x2)
    assert is_multi_affine(x1 * x2)
    assert not is_multi_affine(2 * x1 ** 2)


def test_rendering():
    p, q = var(PQ, "p"), var(PQ, "q")
    assert render_polynomial(F(3, 4) * p * q) == "3/4*p*q"
    assert render_polynomial(p ** 2 + 2 * q) == "p^2 + 2*q"
    assert render_polynomial(1 - p) == "-p + 1"
    f = RationalFunction(p * q, p * q + 1)
    assert render_rational(f) == "( p*q ) / ( p*q + 1 )"
    assert render_rational(RationalFunction(p)) == "p"


def test_region_vertices():
    one = ParameterSpace.from_bounds([("p", 0, 1)])
    assert region_vertices(one.full_region(), ["p"]) == [{"p": 0}, {"p": 1}]
    r = Region(UNIT2, [(F(1, 10), F(3, 10)), (F(1, 10), F(3, 10))])
    vs = region_vertices(r, ["x1", "x2"])
    assert len(vs) == 4 and vs[0] == {"x1": F(1, 10), "x2": F(1, 10)} and vs[-1] == {"x1": F(3, 10), "x2": F(3, 10)}
    big = ParameterSpace.from_bounds([(f"y{i}", 0, 1) for i in range(21)])
    with pytest.raises(AlgebraError):
        region_vertices(big.full_region(), big.names)
    with pytest.raises(AlgebraError):
        region_vertices(r, [])


def test_region_split_examples():
    r = Region(UNIT2, [(0, 1), (0, F(1, 2))])
    a, b = region_split(r)
    assert a.intervals == ((0, F(1, 2)), (0, F(1, 2))) and b.intervals == ((F(1, 2), 1), (0, F(1, 2)))
    a, b = region_split(UNIT2.full_region())
    assert a.intervals[0] == (0, F(1, 2)) and a.intervals[1] == (0, 1)
    one = ParameterSpace.from_bounds([("p", 0, 1)])
    a, b = region_split(Region(one, [(F(2, 10), F(3, 10))]))
    assert a.intervals == ((F(2, 10), F(1, 4)),) and b.intervals == ((F(1, 4), F(3, 10)),)


def test_split_is_relative_to_bounds():
    ps = ParameterSpace.from_bounds([("a", 0, F(1, 10)), ("b", 0, 1)])
    left, _ = ps.full_region().split()
    assert left.intervals[0] == (0, F(1, 20))  # equal relative widths: lowest index wins
    left, _ = left.split()
    assert left.intervals[1] == (0, F(1, 2))


def test_region_rejects_out_of_bounds():
    with pytest.raises(AlgebraError):
        Region(PQ, [(0, F(1, 2)), (F(1, 10), F(1, 2))])


# -- properties -------------------------------------------------------------------

coef = st.fractions(min_value=-5, max_value=5, max_denominator=7)
exps = st.tuples(*[st.integers(0, 3)] * 4).filter(lambda e: sum(e) <= 3)
polys = st.dictionaries(exps, coef, max_size=6).map(lambda d: Polynomial(PS, d))
points = st.tuples(*[st.fractions(0, 1, max_denominator=50)] * 4)


@settings(max_examples=150, deadline=None)
@given(polys, polys, polys, points)
def test_ring_laws(a, b, c, u):
    assert a + b == b + a
    assert a * b == b * a
    assert (a + b) + c == a + (b + c)
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert (a * b + c).eval(u) == a.eval(u) * b.eval(u) + c.eval(u)


@settings(max_examples=30, deadline=None)
@given(polys, st.integers(0, 3), st.integers(0, 2 ** 32))
def test_diff_matches_finite_differences(f, i, seed):
    rnd = random.Random(seed)
    h = 1e-6
    name = PS.names[i]
    d = f.diff(name)
    for _ in range(20):
        u = [rnd.uniform(0.1, 0.9) for _ in range(4)]
        up, dn = list(u), list(u)
        up[i] += h
        dn[i] -= h
        fd = (f.eval_float(up) - f.eval_float(dn)) / (2 * h)
        exact = d.eval_float(u)
        assert abs(fd - exact) <= 1e-6 * max(1.0, abs(exact))


ma_exps = st.tuples(*[st.integers(0, 1)] * 4)
ma_polys = st.dictionaries(ma_exps, coef, max_size=6).map(lambda d: Polynomial(PS, d))
boxes = st.lists(
    st.tuples(st.fractions(0, 1, max_denominator=20), st.fractions(0, 1, max_denominator=20)).map(lambda t: tuple(sorted(t))),
    min_size=4, max_size=4,
)


@settings(max_examples=40, deadline=None)
@given(ma_polys, boxes, st.integers(0, 2 ** 32))
def test_multi_affine_extrema_at_vertices(f, box, seed):
    rnd = random.Random(seed)
    r = Region(PS, box)
    vals = [f.eval(v) for v in r.vertices()]
    lo, hi = min(vals), max(vals)
    for _ in range(1000):
        u = r.sample(rnd)
        assert lo <= f.eval(u) <= hi


@settings(max_examples=100, deadline=None)
@given(boxes)
def test_split_halves_volume(box):
    r = Region(PS, box)
    a, b = r.split()
    assert a.volume() + b.volume() == r.volume()
