import json

import pytest

from isbv.algebra import VariableSet, parameter_field, parse_poly, prime_field, to_ring
from isbv.cache import BasisCache, decode_basis, encode_basis, entry_key
from isbv.groebner import GREVLEX, LEX, Ideal, buchberger, set_basis_store

XY = VariableSet(('x', 'y'))


@pytest.fixture
def store(tmp_path):
    cache = BasisCache(tmp_path / 'cache')
    set_basis_store(cache)
    yield cache
    set_basis_store(None)


def _gens(*texts):
    return [parse_poly(t, XY) for t in texts]


def test_hit_after_miss(store):
    gens = _gens("x^2 - y", "x*y - 1")
    first = Ideal(gens, XY).groebner()
    assert store.stats() == {'hits': 0, 'misses': 1, 'mismatches': 0}
    again = Ideal(gens, XY).groebner()
    assert again == first
    assert store.hits == 1


def test_key_depends_on_order_and_domain():
    gens = _gens("x^2 - y", "x*y - 1")
    F = prime_field(5)
    modular = [to_ring(g, XY.ring(F)) for g in gens]
    keys = {entry_key(gens, GREVLEX), entry_key(gens, LEX), entry_key(modular, GREVLEX)}
    assert len(keys) == 3


def test_encoding_over_finite_field():
    F = prime_field(7)
    gens = [to_ring(g, XY.ring(F)) for g in _gens("3*x^2 - y", "x*y - 1")]
    basis = buchberger(gens)
    assert decode_basis(json.loads(json.dumps(encode_basis(basis))), XY.ring(F)) == basis


def test_corrupted_entry_is_dropped(store):
    gens = _gens("x^2 + y^2 - 1", "x - y")
    expected = Ideal(gens, XY).groebner()
    path = store.path(entry_key(gens, GREVLEX))
    path.write_text('{"key": ')
    assert Ideal(gens, XY).groebner() == expected
    assert store.misses == 2
    assert path.exists()


def test_audit_repairs_a_wrong_entry(tmp_path):
    gens = _gens("x^2 - y", "x*y - 1")
    cache = BasisCache(tmp_path, audit=True)
    cache.save(gens, GREVLEX, _gens("x - 1"))
    fresh = cache.fetch(gens, GREVLEX)
    assert fresh == buchberger(gens)
    assert cache.mismatches == 1
    assert BasisCache(tmp_path).fetch(gens, GREVLEX) == fresh


def test_parameter_fields_are_not_cached(tmp_path):
    cache = BasisCache(tmp_path)
    K = parameter_field('c')
    gens = [to_ring(g, XY.ring(K)) for g in _gens("x^2 - y")]
    cache.save(gens, GREVLEX, gens)
    assert cache.fetch(gens, GREVLEX) is None
    assert not any(tmp_path.glob('*/*.json'))
