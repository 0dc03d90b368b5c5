import pytest
from hypothesis import assume, given, settings, strategies as st
from sympy import QQ, Poly, groebner, symbols

from isbv.algebra import VariableSet, parse_poly
from isbv import groebner as gb
from isbv.groebner import GREVLEX, LEX, Ideal

XY = VariableSet(('x', 'y'))
XYZ = VariableSet(('x', 'y', 'z'))


def _ideal(texts, variables=XYZ):
    return Ideal([parse_poly(t, variables) for t in texts], variables)


def _monic_set(polys, gens):
    return {Poly(p, *gens, domain=QQ).monic() for p in polys}


@pytest.mark.parametrize("texts,order", [
    (["x^2 - y", "x*y - 1"], 'grevlex'),
    (["x^2 + y^2 + z^2 - 1", "x - y", "y*z - x"], 'grevlex'),
    (["x*y - z", "x*z - y", "y*z - x"], 'lex'),
    (["x^3 - 2*x*y", "x^2*y - 2*y^2 + x"], 'grevlex'),
])
def test_matches_sympy(texts, order):
    I = _ideal(texts)
    G = I.groebner(LEX if order == 'lex' else GREVLEX)
    x, y, z = symbols('x y z')
    expected = groebner([parse_poly(t, XYZ).as_expr() for t in texts], x, y, z, order=order)
    assert _monic_set([g.as_expr() for g in G], (x, y, z)) == \
        _monic_set(list(expected.exprs), (x, y, z))


def test_budget_exceeded():
    gens = [parse_poly("x^2 - y", XY), parse_poly("x*y - 1", XY)]
    with pytest.raises(gb.BudgetExceeded) as e:
        gb.buchberger(gens, GREVLEX, budget=0)
    assert e.value.budget == 0


def test_membership_and_unit():
    I = _ideal(["x^2 - y", "x*y - 1"], XY)
    assert I.contains(parse_poly("x^3 - 1", XY))
    assert not I.contains(parse_poly("x - 1", XY))
    assert not I.is_unit
    assert _ideal(["x", "x - 1"], XY).is_unit


def test_zero_ideal_needs_ring():
    with pytest.raises(ValueError):
        Ideal([])
    assert not Ideal([], XY).contains(parse_poly("x", XY))


def test_eliminate_twisted_parametrisation():
    V = VariableSet(('t', 'x', 'y'))
    I = Ideal([parse_poly("x - t", V), parse_poly("y - t^2", V)], V)
    J = gb.eliminate(I, ['t'])
    assert J.contains(parse_poly("y - x^2", V))
    assert all(not g.degree(0) for g in J.generators)
    with pytest.raises(ValueError):
        gb.eliminate(I, ['q'])


def test_saturate():
    x = parse_poly("x", XY)
    assert gb.saturate(_ideal(["x*y"], XY), x).contains(parse_poly("y", XY))
    assert gb.saturate(_ideal(["x^2", "x*y"], XY), x).is_unit
    with pytest.raises(ValueError):
        gb.saturate(_ideal(["x*y"], XY), XY.ring().zero)


def test_same_principal_ideal():
    f = parse_poly("x*y - z^2", XYZ)
    assert gb.same_principal_ideal(f, -3 * f)
    assert not gb.same_principal_ideal(f, f + parse_poly("x", XYZ))
    assert gb.same_principal_ideal(XYZ.ring().zero, XYZ.ring().zero)


@pytest.mark.parametrize("texts,expected", [
    (["x^2", "y^2"], 4),
    (["x^2 - y", "x*y - 1"], 3),
    (["x^2"], None),
    (["x", "x - 1"], 0),
])
def test_staircase(texts, expected):
    assert gb.staircase(_ideal(texts, XY).groebner()) == expected


def test_tangent_cone_of_cusp():
    cone = gb.tangent_cone(_ideal(["y^2 - x^3"], XY), {}, {})
    assert cone.contains(parse_poly("y^2", XY))
    assert not cone.contains(parse_poly("y", XY))


def test_tangent_cone_of_node():
    cone = gb.tangent_cone(_ideal(["y^2 - x^2*(x + 1)"], XY), {}, {})
    assert cone.contains(parse_poly("y^2 - x^2", XY))


def test_local_eliminate():
    I = _ideal(["y - x^2", "z - x*y"])
    local = gb.local_eliminate(I, {}, {})
    assert local.eliminated == ['y', 'z']
    assert local.remaining == ['x']
    assert local.equations == []


def test_local_eliminate_on_chart():
    V = VariableSet(('x0', 'x1', 'x2'))
    I = Ideal([parse_poly("x0*x2 - x1^2", V)], V)
    local = gb.local_eliminate(I, {"x1": 1, "x2": 1}, {"x0": 1}, QQ)
    assert local.eliminated == ['x2']


def test_point_not_on_variety():
    with pytest.raises(gb.PointNotOnVariety):
        gb.local_eliminate(_ideal(["y - x^2"], XY), {'x': 1}, {})
    with pytest.raises(gb.PointNotOnVariety):
        gb.tangent_cone(_ideal(["y - x^2"], XY), {'x': 1}, {})


def test_quadratic_span():
    eqs = [parse_poly(t, XYZ) for t in ["x*y + z^3", "x^3"]]
    assert gb.quadratic_span(eqs) == [parse_poly("x*y", XYZ)]
    with pytest.raises(ValueError):
        gb.quadratic_span([parse_poly("x + y^2", XYZ)])


small = st.dictionaries(st.tuples(st.integers(0, 2), st.integers(0, 2)),
                        st.integers(-3, 3), min_size=1, max_size=3)


@settings(max_examples=1000, deadline=None)
@given(st.lists(small, min_size=1, max_size=3))
def test_basis_properties(terms):
    R = XY.ring()
    gens = [R.from_dict({m: QQ(c) for m, c in d.items() if c}) for d in terms]
    gens = [g for g in gens if g]
    assume(gens)
    try:
        G = gb.buchberger(gens, GREVLEX, budget=2000)
    except gb.BudgetExceeded:
        assume(False)
    for g in gens:
        assert not gb.normal_form(g, G, GREVLEX)
    for i, f in enumerate(G):
        for g in G[i + 1:]:
            s = gb.spoly(f, g, gb.leading_monomial(f, GREVLEX), gb.leading_monomial(g, GREVLEX))
            assert not gb.normal_form(s, G, GREVLEX)
    h = gens[0] * gens[0] + XY.ring().gens[0]
    once = gb.normal_form(h, G, GREVLEX)
    assert gb.normal_form(once, G, GREVLEX) == once
