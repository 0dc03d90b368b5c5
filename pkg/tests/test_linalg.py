import pytest
from hypothesis import given, settings, strategies as st
from sympy import QQ

from isbv.algebra import PolyMap, VariableSet, parse_poly, prime_field, substitute
from isbv import linalg
from isbv.linalg import ExactMatrix

CONIC = VariableSet(('x', 'y', 'z0', 'z1', 'z2'), [('P0', ('z0', 'z1', 'z2'))])


def _qq(rows):
    return ExactMatrix([[QQ(c) for c in r] for r in rows], QQ)


@pytest.mark.parametrize("rows,expected", [
    ([[1, 2], [2, 4]], 1),
    ([[1, 0], [0, 1]], 2),
    ([[0, 0, 0]], 0),
    ([[1, 2, 3], [4, 5, 6], [7, 8, 9]], 2),
])
def test_rank(rows, expected):
    assert linalg.rank(_qq(rows)) == expected
    assert linalg.rank_mod_p(rows, 7) == expected


def test_rank_drops_mod_p():
    assert linalg.rank(_qq([[3, 0], [0, 1]])) == 2
    assert linalg.rank_mod_p([[3, 0], [0, 1]], 3) == 1
    F = prime_field(3)
    assert linalg.rank(ExactMatrix([[F(3), F(0)], [F(0), F(1)]], F)) == 1


def test_ragged_matrix():
    with pytest.raises(ValueError):
        ExactMatrix([[QQ(1)], [QQ(1), QQ(2)]])


def test_nullspace():
    kernel = linalg.nullspace(_qq([[1, 1, 0], [0, 0, 1]]))
    assert kernel == [[QQ(-1), QQ(1), QQ(0)]]
    assert len(linalg.nullspace(ExactMatrix([], QQ, col_labels=[0, 1]))) == 2


@pytest.mark.parametrize("n,d,count", [(3, 2, 6), (9, 2, 45), (2, 4, 5), (4, 0, 1)])
def test_monomials_of_degree(n, d, count):
    monos = linalg.monomials_of_degree(n, d)
    assert len(monos) == count == len(set(monos))
    assert all(sum(m) == d for m in monos)


def test_block_monomials():
    assert len(linalg.block_monomials([2, 3], [1, 1])) == 6
    assert len(linalg.block_monomials([3, 3], [2, 2])) == 36


def test_coefficient_matrix():
    R = VariableSet(('x', 'y')).ring()
    f, g = R.gens
    M = linalg.coefficient_matrix([f + g, 2 * f], [(1, 0), (0, 1)])
    assert M.rows == [[1, 1], [2, 0]]
    with pytest.raises(ValueError):
        linalg.coefficient_matrix([f * g], [(1, 0)])


@pytest.mark.parametrize("degree,expected", [(1, 3), (2, 5), (3, 7)])
def test_graded_piece_of_a_conic(degree, expected):
    conic = parse_poly("x*z0^2 + y*z1^2 - z2^2", CONIC)
    assert linalg.graded_piece_dim([conic], CONIC, ['P0'], degree) == expected
    assert linalg.graded_piece_dim([conic], CONIC, ['P0'], degree, {'x': 0, 'y': 0}) == expected
    F = prime_field(5)
    point = {'x': 1, 'y': 4, 'domain': F}
    assert linalg.graded_piece_dim([conic], CONIC, ['P0'], degree, point) == expected


def test_graded_piece_rejects_inhomogeneous():
    with pytest.raises(linalg.NotHomogeneousError):
        linalg.graded_piece_dim([parse_poly("z0 + z1^2", CONIC)], CONIC, ['P0'], 2)


def test_image_rank_of_veronese():
    m = PolyMap.from_text(VariableSet(('z0', 'z1', 'z2')), VariableSet(('u', 'v')),
                          ["u^2", "u*v", "v^2"])
    assert linalg.image_rank(m, 2, ['z0', 'z1', 'z2'], []) == (5, 'column-scaling')


def test_image_rank_scales_base_monomials():
    m = PolyMap.from_text(VariableSet(('z0', 'z1', 'z2')), VariableSet(('s', 't', 'u', 'v')),
                          ["s*u^2", "u*v", "t*v^2"])
    assert linalg.image_rank(m, 2, ['z0', 'z1', 'z2'], ['s', 't']) == (5, 'column-scaling')


def test_image_rank_over_fraction_field():
    m = PolyMap.from_text(VariableSet(('z0', 'z1')), VariableSet(('s', 'u', 'v')),
                          ["u + s*v", "v"])
    assert linalg.image_rank(m, 1, ['z0', 'z1'], ['s']) == (2, 'fraction-field')


@pytest.mark.parametrize("text,rank,radical", [
    ("x*y - z^2", 3, []),
    ("x^2 + 2*x*y + y^2", 1, ['z']),
    ("x^2 + y^2", 2, ['z']),
    ("x*y + x^3", 2, ['z']),
])
def test_quadratic_form(text, rank, radical):
    V = VariableSet(('x', 'y', 'z'))
    q = linalg.QuadraticForm.from_polynomial(parse_poly(text, V), ['x', 'y', 'z'])
    assert q.rank == rank
    assert q.radical() == radical


def test_quadratic_rank_needs_vanishing_linear_part():
    V = VariableSet(('x', 'y'))
    with pytest.raises(ValueError):
        linalg.quadratic_rank(parse_poly("x + y^2", V), ['x', 'y'])
    assert linalg.quadratic_rank(parse_poly("x*y", V), ['x', 'y']) == 2


def test_jacobian_rank():
    assert linalg.jacobian_rank([[QQ(1), QQ(0)], [QQ(2), QQ(0)]]) == 1
    assert linalg.jacobian_rank([]) == 0


matrices = st.integers(1, 5).flatmap(
    lambda w: st.lists(st.lists(st.integers(-9, 9), min_size=w, max_size=w), min_size=1, max_size=5))


@settings(max_examples=1000, deadline=None)
@given(matrices, st.sampled_from([3, 5, 7, 11]))
def test_modular_rank_never_exceeds_rational_rank(rows, p):
    assert linalg.rank_mod_p(rows, p) <= linalg.rank(_qq(rows))


@settings(max_examples=1000, deadline=None)
@given(matrices, st.sampled_from([0, 3, 5, 7]))
def test_rank_of_transpose(rows, p):
    transposed = [list(c) for c in zip(*rows)]
    if p:
        assert linalg.rank_mod_p(rows, p) == linalg.rank_mod_p(transposed, p)
    else:
        assert linalg.rank(_qq(rows)) == linalg.rank(_qq(transposed))


coefficients = st.lists(st.integers(-4, 4), min_size=6, max_size=6)
shears = st.lists(st.integers(-3, 3), min_size=3, max_size=3)


@settings(max_examples=1000, deadline=None)
@given(coefficients, shears, st.permutations([0, 1, 2]))
def test_quadratic_rank_under_change_of_basis(coeffs, shear, perm):
    V = VariableSet(('x', 'y', 'z'))
    x, y, z = V.ring().gens
    monomials = [x * x, y * y, z * z, x * y, x * z, y * z]
    f = sum((c * m for c, m in zip(coeffs, monomials)), V.ring().zero)
    a, b, c = shear
    triangular = [x + a * y + b * z, y + c * z, z]
    change = PolyMap(V, V, [triangular[i] for i in perm])
    g = substitute(f, change)
    names = ['x', 'y', 'z']
    assert linalg.quadratic_rank(g, names) == linalg.quadratic_rank(f, names)
