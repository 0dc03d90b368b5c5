import pytest
from hypothesis import given, settings, strategies as st
from sympy import QQ

from isbv import algebra
from isbv.algebra import PolyMap, VariableSet, format_poly, parse_poly, substitute

XYZ = VariableSet(('x', 'y', 'z'))
R = XYZ.ring()

exponents = st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3))
polys = st.dictionaries(exponents, st.integers(-6, 6), max_size=6).map(
    lambda d: R.from_dict({m: QQ(c) for m, c in d.items() if c}))


def test_parse_expands_powers():
    f = parse_poly("(x + y)^2 - 2*x*y", XYZ)
    assert format_poly(f) == "x^2 + y^2"


def test_format_leading_sign():
    assert format_poly(parse_poly("y - x", XYZ)) == "-x + y"
    assert format_poly(parse_poly("-(x*z) - 1", XYZ)) == "-x*z - 1"
    assert format_poly(R.zero) == '0'


def test_parameter_field_round_trip():
    K = algebra.parameter_field('s')
    V = VariableSet(('x', 'y'))
    f = parse_poly("s^2*x - (s + 1)*y + 3", V, K)
    text = format_poly(f)
    assert text.startswith("(s^2)*x")
    assert '**' not in text
    assert parse_poly(text, V, K) == f
    with pytest.raises(algebra.UnknownVariableError):
        parse_poly("s*x", V)


@pytest.mark.parametrize("text,position", [
    ("x +", 3),
    ("x / y", 2),
    ("x $ y", 2),
    ("", 0),
])
def test_syntax_errors_carry_position(text, position):
    with pytest.raises(algebra.PolynomialSyntaxError) as e:
        parse_poly(text, XYZ)
    assert e.value.position == position


def test_bad_exponent():
    with pytest.raises(algebra.PolynomialSyntaxError):
        parse_poly("x^0", XYZ)


def test_unknown_variable():
    with pytest.raises(algebra.UnknownVariableError):
        parse_poly("x + w", XYZ)


def test_primed_names():
    V = VariableSet(("z0", "z'0"))
    f = parse_poly("z0^2 - z'0^2", V)
    assert format_poly(f) == "z0^2 - z'0^2"


def test_variable_set_validation():
    with pytest.raises(ValueError):
        VariableSet(('x', 'x'))
    with pytest.raises(algebra.UnknownVariableError):
        VariableSet(('x',), [('P0', ('y',))])
    V = VariableSet(('s', 'x0', 'x1'), [('base', ('s',)), ('P0', ('x0', 'x1'))])
    assert V.tags == ('base', 'P0')
    assert V.without(['s']).names == ('x0', 'x1')
    assert V.extended(['w'], front=True).names == ('w', 's', 'x0', 'x1')


@pytest.mark.parametrize("text,expected", [
    ("Q", [0]),
    ("QQ", [0]),
    ("p:3", [3]),
    ("p:3,5,7", [3, 5, 7]),
])
def test_parse_field(text, expected):
    assert [algebra.characteristic(d) for d in algebra.parse_field(text)] == expected


@pytest.mark.parametrize("text", ["p:2", "p:9", "R", "p:", "p:x"])
def test_parse_field_rejects(text):
    with pytest.raises(ValueError):
        algebra.parse_field(text)


def test_characteristic_two_is_rejected():
    with pytest.raises(ValueError):
        algebra.prime_field(2)


def test_modular_reduction():
    F = algebra.prime_field(5)
    assert algebra.convert_coefficient(QQ(1, 3), QQ, F) == F(2)
    with pytest.raises(algebra.ReductionError):
        algebra.convert_coefficient(QQ(1, 5), QQ, F)


def test_to_ring_over_finite_field():
    F = algebra.prime_field(3)
    f = parse_poly("4*x^2 - y", XYZ)
    g = algebra.change_domain(f, F)
    assert format_poly(g) == "x^2 + 2*y"


def test_arith_rejects_mixed_rings():
    f = parse_poly("x", XYZ)
    g = parse_poly("x", VariableSet(('x', 'y')))
    with pytest.raises(algebra.DomainMismatchError):
        algebra.arith(f, g, 'add')
    assert algebra.arith(f, f, 'mul') == parse_poly("x^2", XYZ)


def test_multidegree():
    V = VariableSet(('s', 'x', 'y'), [('P0', ('x', 'y'))])
    assert algebra.multidegree(parse_poly("s*x^2 + x*y", V), V, 'P0') == 2
    assert algebra.multidegree(parse_poly("x + y^2", V), V, 'P0') is None


def test_evaluate_and_jacobian():
    f = parse_poly("x^2 + y", XYZ)
    assert algebra.evaluate(f, {'x': QQ(2), 'y': QQ(3), 'z': QQ(0)}) == 7
    J = algebra.jacobian([f], ['x', 'z'])
    assert J == [[parse_poly("2*x", XYZ), R.zero]]


def test_polymap_veronese_kills_conic():
    m = PolyMap.from_text(XYZ, VariableSet(('u', 'v')), ["u^2", "u*v", "v^2"])
    assert substitute(parse_poly("x*z - y^2", XYZ), m) == 0
    assert m(parse_poly("x + z", XYZ)) == parse_poly("u^2 + v^2", VariableSet(('u', 'v')))


def test_polymap_composition():
    uv = VariableSet(('u', 'v'))
    first = PolyMap.from_text(XYZ, uv, ["u", "u + v", "v"])
    second = PolyMap.from_text(uv, VariableSet(('t',)), ["t", "t^2"])
    both = first.then(second)
    assert format_poly(both.image('y')) == "t^2 + t"


def test_substitution_map():
    m = algebra.substitution_map(XYZ, {'x': 'y + 1'})
    assert substitute(parse_poly("x^2", XYZ), m) == parse_poly("y^2 + 2*y + 1", XYZ)


@pytest.mark.parametrize("text,p,value", [
    ("(p+1)^2", 5, 36),
    ("(2*p+1)^2", 5, 121),
    ("(p+1)*(p+1)", 3, 16),
    ("p^2 + p + 1", 7, 57),
])
def test_count_expression(text, p, value):
    count = algebra.count_expression(text)
    assert count(p) == value
    assert count.text == text


@settings(max_examples=1000, deadline=None)
@given(polys, polys, polys)
def test_ring_axioms(f, g, h):
    assert (f + g) * h == f * h + g * h
    assert f * (g * h) == (f * g) * h
    assert f + g == g + f
    assert f - f == 0


@settings(max_examples=1000, deadline=None)
@given(polys, polys)
def test_substitution_is_a_homomorphism(f, g):
    m = PolyMap.from_text(XYZ, XYZ, ["x + y", "y*z", "z^2 - x"])
    assert m(f * g) == m(f) * m(g)
    assert m(f + g) == m(f) + m(g)


@settings(max_examples=1000, deadline=None)
@given(polys)
def test_parser_round_trip(f):
    assert parse_poly(format_poly(f), XYZ) == f


@settings(max_examples=1000, deadline=None)
@given(polys, polys, st.sampled_from([3, 5, 7, 11]))
def test_reduction_mod_p_is_multiplicative(f, g, p):
    F = algebra.prime_field(p)
    reduced = algebra.change_domain(f * g, F)
    assert reduced == algebra.change_domain(f, F) * algebra.change_domain(g, F)
    assert algebra.change_domain(f + g, F) == algebra.change_domain(f, F) + algebra.change_domain(g, F)
