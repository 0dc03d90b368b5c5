import pytest

from isbv import verify
from isbv.groebner import BudgetExceeded
from isbv.models import apply_mutation, builtin_models, load_model, model_to_dict
from isbv.verify import CheckOptions, CheckResult, VerificationReport


@pytest.fixture(scope='module')
def registry():
    return builtin_models()


@pytest.fixture
def small():
    return CheckOptions(primes=(3,), dmax=2, samples=3, closure_budget=1)


@pytest.mark.parametrize("name", ['i-ii', 'iii-ii'])
def test_relations_vanish(registry, name):
    result = verify.check_relations(registry[name])
    assert result.passed
    assert result.witness == {'rows': 20, 'vanishing': 20}


def test_swapped_sections_break_relations(registry):
    m = apply_mutation(registry['i-ii'], 'swap-sections:3,4')
    result = verify.check_relations(m)
    assert result.status == 'fail'
    assert result.witness['first_failure']['row'] == result.witness['failing_rows'][0]
    assert result.witness['mutations'] == ['swap-sections:3,4']


def test_relation_space(registry):
    result = verify.check_relation_space(registry['i-ii'])
    assert result.passed
    w = result.witness
    assert w['unknowns'] == 180
    assert w['generic_dim'] == 20
    assert w['table_rank'] == 20
    assert w['table_generic_rank'] == 20
    assert w['generic_certificate'] == 'column-scaling'


def test_dropped_row_is_detected(registry):
    m = apply_mutation(registry['i-ii'], 'drop-row:7')
    result = verify.check_relation_space(m)
    assert result.status == 'fail'
    assert result.witness['table_rank'] == 19
    assert result.witness['generic_dim'] == 20
    assert result.witness['mutations'] == ['drop-row:7']


def test_derive_relations(registry):
    derived = verify.derive_relations(registry['i-ii'], 2)
    assert derived.generic_dim == len(derived.relations) == 20
    assert derived.table_rank == 20
    assert derived.unexpressed == []
    assert sorted(derived.combinations) == list(range(1, 21))
    assert verify.derive_relations(registry['i-ii'], 1).relations == []


def test_freeness_rank(registry):
    options = CheckOptions(primes=(5,), samples=3, closure_budget=1)
    result = verify.check_freeness(registry['iii-ii'], options)
    assert result.status in ('pass', 'skipped')
    assert list(result.witness['rank'][0]['dimensions']) == ['8']
    assert result.witness['expected_rank'] == 8


def test_freeness_detects_a_dependent_basis(registry):
    m = apply_mutation(registry['iii-ii'], 'basis:7=x2')
    options = CheckOptions(primes=(5,), samples=2, closure_budget=1)
    result = verify.check_freeness(m, options)
    assert result.status == 'fail'
    assert result.witness['rank'][0]['first_defect']['basis_rank'] == 7


def test_d_infinity(registry, small):
    result = verify.check_singularities(registry['iv-ii'], small)
    assert result.passed
    claim = result.witness['claims'][0]
    assert claim['mixed_cubic'] == 'x*z0^2'
    assert claim['quadratic_rank'] == 3
    assert claim['eliminated'] == ['y']
    assert claim['line_jacobian_rank'] == 1
    assert claim['tangent_cone_agrees']
    assert result.witness['scans'][0]['off_locus'] == 0


def test_ii_ii_singularities(registry, small):
    result = verify.check_singularities(registry['ii-ii'], small)
    assert result.passed
    statuses = [c['status'] for c in result.witness['claims']]
    assert statuses == ['pass'] * 6
    assert result.witness['scans'][0]['singular'] > 0


def test_toric_chart(registry, small):
    m = registry['ii-ii']
    claim = m.claims.singularities[4]
    witness = verify.CERTIFIERS[claim.kind].certify(m, claim, small)
    assert witness['ok']
    assert witness['unit_multiple']
    assert witness['eliminated'] == ['x']


def test_a1_curve(registry, small):
    m = registry['i-ii']
    claim = m.claims.singularities[0]
    witness = verify.CERTIFIERS[claim.kind].certify(m.descended(), claim, small)
    assert witness['ok']
    assert witness['jacobian_rank'] == 5
    assert witness['quadratic_rank'] == 4
    assert sorted(witness['eliminated']) == ['x5', 'x6', 'x7', 'x8', 'y']


def test_flatness_without_sections(registry, small):
    result = verify.check_flatness(registry['ii-ii'], small)
    assert result.passed
    assert result.witness['generic'] == {'1': 9, '2': 25}
    assert result.witness['primes'][0]['values'] == {'9,25': 9}
    assert result.witness['claims'][1]['components'] == [True] * 4


def test_wrong_fiber_component(registry, small):
    doc = model_to_dict(registry['ii-ii'])
    doc['claims']['fibers'][1]['components'] = [["z0 - z2", "z'0 - z'2"], ["z0 - z1"]]
    result = verify.check_flatness(load_model(doc), small)
    assert result.status == 'fail'
    assert result.witness['claims'][1]['components'] == [True, False]


def test_flatness_sandwich(registry):
    result = verify.check_flatness(registry['i-ii'], CheckOptions(primes=(5,), dmax=2))
    assert result.passed
    assert result.witness['generic'] == {'1': 9, '2': 25}
    assert set(result.witness['certificates'].values()) == {'specialization-sandwich'}


def test_identities(registry):
    result = verify.check_identities(registry['segre-d2'])
    assert result.passed
    assert result.witness['identities'][0]['components'] == 9
    assert result.witness['identities'][0]['pullbacks'] == 2


def test_wrong_scale_is_reported(registry):
    m = apply_mutation(registry['segre-d2'], 'scale:0=t')
    result = verify.check_identities(m)
    assert result.status == 'fail'
    mismatch = result.witness['identities'][0]['first_mismatch']
    assert mismatch['component'] == 'x0'
    assert mismatch['residual_factor'] == '1/t'


def test_fiber_counts(registry):
    result = verify.check_fiber_counts(registry['ii-ii'], CheckOptions(primes=(3, 5)))
    assert result.passed
    counts = {(tuple(e['point'].values()), e['prime']): e['count'] for e in result.witness['explicit']}
    assert counts[((1, 1), 5)] == 36
    assert counts[((1, 0), 5)] == 121
    assert all(not f['mismatches'] for f in result.witness['formula'])


def test_plan_keeps_registry_order(registry):
    models = [registry['segre-d2'], registry['ii-ii']]
    tasks = verify.plan(models, {'counts', 'identities', 'relations'})
    assert [(m.name, c) for m, c in tasks] == [('segre-d2', 'identities'), ('ii-ii', 'counts')]


def test_run_suite(registry):
    options = CheckOptions(primes=(3,))
    report = verify.run_suite([registry['ii-ii'], registry['segre-d2']], {'counts', 'identities'}, options)
    assert [r.name for r in report.results] == ['counts', 'identities']
    assert report.summary() == {'pass': 2, 'fail': 0, 'skipped': 0}
    assert report.environment['primes'] == [3]
    assert report.as_dict(deterministic=True)['checks'][0]['millis'] == 0


def test_budget_overrun_is_a_skip(registry, mocker):
    def explode(model, options):
        raise BudgetExceeded(10, 10, 4)
    mocker.patch.dict(verify.CHECKS, {'relations': verify.Check('relations', explode, lambda m: True, '')})
    result = verify.run_check(registry['i-ii'], 'relations', CheckOptions())
    assert result.status == 'skipped'
    assert result.witness == {'steps': 10, 'budget': 10, 'basis_size': 4}


@pytest.mark.parametrize("statuses,allow_skip,expected", [
    (['pass', 'pass'], False, 'pass'),
    (['pass', 'skipped'], False, 'fail'),
    (['pass', 'skipped'], True, 'pass'),
    (['fail', 'skipped'], True, 'fail'),
])
def test_report_status(statuses, allow_skip, expected):
    report = VerificationReport([CheckResult('x', 'm', s) for s in statuses])
    assert report.status(allow_skip) == expected


def test_d_infinity_point_of_iii_ii(registry, small):
    m = registry['iii-ii']
    claim = m.claims.singularities[0]
    witness = verify.CERTIFIERS[claim.kind].certify(m.descended(), claim, small)
    assert witness['ok']
    assert witness['quadratic_rank'] == 3
    assert witness['mixed_cubic'] is not None
    assert witness['tangent_cone_agrees']


@pytest.mark.parametrize("name,charts", [('iv-iv-meet', 3), ('iv-iv-disjoint', 9)])
def test_smooth_total_space(registry, small, name, charts):
    result = verify.check_singularities(registry[name], small)
    assert result.passed
    claim = result.witness['claims'][0]
    assert claim['charts'] == charts
    assert claim['singular_charts'] == []
    assert result.witness['scans'][0]['singular'] == 0


def test_non_reduced_total_space_is_not_smooth(registry, small):
    doc = model_to_dict(registry['iv-iv-meet'])
    doc['equations'] = ["(x*z0^2 + y*z1^2 - z2^2)^2"]
    m = load_model(doc)
    claim = m.claims.singularities[0]
    witness = verify.CERTIFIERS[claim.kind].certify(m, claim, small)
    assert witness['generic_jacobian_rank'] == 1
    assert not witness['ok']
    assert witness['singular_charts'] == [['z0'], ['z1'], ['z2']]


@pytest.mark.parametrize("name", ['i-ii', 'iii-ii'])
def test_flatness_to_degree_three(registry, name):
    result = verify.check_flatness(registry[name], CheckOptions(primes=(3,), dmax=3))
    assert result.passed
    assert result.witness['generic'] == {'1': 9, '2': 25, '3': 49}
    assert result.witness['primes'][0]['values'] == {'9,25,49': 9}


def test_relation_space_of_iii_ii(registry):
    result = verify.check_relation_space(registry['iii-ii'])
    assert result.passed
    assert result.witness['unknowns'] == 180
    assert result.witness['generic_dim'] == 20
    assert result.witness['table_rank'] == 20


def test_freeness_closure(registry):
    m = registry['i-ii']
    closure = verify.freeness_closure(m, m.claims.freeness, 5000)
    assert closure == {'products': 48, 'groebner_size': 20, 'failures': []}


def test_exhaustive_freeness_over_f3(registry):
    result = verify.check_freeness(registry['i-ii'], CheckOptions(primes=(3,)))
    assert result.passed
    assert result.witness['closure']['status'] == 'pass'
    scan = result.witness['rank'][0]
    assert scan['mode'] == 'exhaustive'
    assert scan['dimensions'] == {'8': 243}


@pytest.mark.parametrize("name,check,spec", [
    ('i-ii', 'relations', 'swap-sections:3,4'),
    ('i-ii', 'relations', 'swap-sections:0,5'),
    ('i-ii', 'relations', 'swap-sections:7,8'),
    ('iii-ii', 'relations', 'swap-sections:7,8'),
    ('i-ii', 'span', 'drop-row:1'),
    ('i-ii', 'span', 'drop-row:20'),
    ('iii-ii', 'span', 'drop-row:7'),
    ('i-ii', 'freeness', 'basis:0=x2'),
    ('iii-ii', 'freeness', 'basis:7=x2'),
    ('segre-d2', 'identities', 'scale:0=t'),
    ('segre-d2', 'identities', 'scale:0=2'),
])
def test_mutation_catalogue_fails(registry, name, check, spec):
    m = apply_mutation(registry[name], spec)
    result = verify.run_check(m, check, CheckOptions(primes=(5,), samples=2, closure_budget=1))
    assert result.status == 'fail'
    assert result.witness['mutations'] == [spec]


def test_run_suite_is_deterministic(registry):
    models = [registry['ii-ii'], registry['iv-iv-meet']]
    checks = {'singular', 'flatness', 'counts'}
    options = CheckOptions(primes=(3,), dmax=2)
    first = verify.run_suite(models, checks, options).as_dict(deterministic=True)
    second = verify.run_suite(models, checks, options, jobs=2).as_dict(deterministic=True)
    assert len(first['checks']) == 6
    assert first == second
