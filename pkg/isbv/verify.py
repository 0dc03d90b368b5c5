"""Checks of the claims attached to the local models.

Every check takes a model and a :class:`CheckOptions` and returns a
:class:`CheckResult`. A failing claim never raises: the result carries the
status ``fail`` and a witness; a Groebner computation that runs out of
budget turns into ``skipped`` with the budget diagnostics.
"""
import logging
import multiprocessing
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from itertools import combinations, product

from sympy import QQ

from isbv.algebra import (VariableSet, format_poly, parameter_field,
                          parse_poly, prime_field, substitute, substitution_map)
from isbv.groebner import (DEFAULT_BUDGET, GREVLEX, BudgetExceeded, Ideal,
                           PointNotOnVariety, buchberger, homogeneous_part,
                           local_eliminate, lowest_degree, normal_form,
                           quadratic_span, same_principal_ideal, saturate,
                           set_basis_store, tangent_cone)
from isbv.ffenum import (Ambient, claimed_count, enumerate_points, fiber_count,
                         formula_count, on_locus, scan_base_points,
                         smoothness_scan, specialization_images,
                         specialization_scan, specialization_setup, specialize)
from isbv.linalg import (ExactMatrix, QuadraticForm, base_element, base_field,
                         coefficient_matrix, graded_piece_dim, image_rank,
                         jacobian_rank, monomials_of_degree, nullspace, rank)
from isbv.models import model_from_dict, model_to_dict

GENERIC_TRIALS = ((1, 1), (2, 3), (3, 5))


@dataclass
class CheckOptions:
    """Knobs shared by all checks.

    Attributes:
        primes: finite fields for the enumeration based checks.
        dmax: highest degree of the flatness check.
        budget: cap on S-pair reductions per Groebner basis.
        closure_budget: cap for the freeness closure basis over the
            parameter field.
        seed: seed of every sampled scan.
        samples: sampled freeness specializations for p > 3.
        scan_samples: base points off the divisors in smoothness scans.
        scan_limit: largest number of ambient points a single smoothness
            scan may examine.
    """
    primes: tuple = (3, 5, 7)
    dmax: int = 3
    budget: int = DEFAULT_BUDGET
    closure_budget: int = 5000
    seed: int = 42
    samples: int = 500
    scan_samples: int = 4
    scan_limit: int = 10_000_000

    def as_dict(self):
        d = dict(vars(self))
        d['primes'] = list(self.primes)
        return d


@dataclass
class CheckResult:
    name: str
    model: str
    status: str
    witness: dict = field(default_factory=dict)
    millis: int = 0

    @property
    def passed(self):
        return self.status == 'pass'

    def as_dict(self, deterministic=False):
        return {'name': self.name, 'model': self.model, 'status': self.status,
                'witness': self.witness, 'millis': 0 if deterministic else self.millis}


@dataclass
class VerificationReport:
    """Results in registry order plus the environment they were computed in."""
    results: list = field(default_factory=list)
    environment: dict = field(default_factory=dict)

    def summary(self):
        counts = {'pass': 0, 'fail': 0, 'skipped': 0}
        for r in self.results:
            counts[r.status] += 1
        return counts

    def status(self, allow_skip=False):
        s = self.summary()
        if s['fail'] or (s['skipped'] and not allow_skip):
            return 'fail'
        return 'pass'

    def as_dict(self, deterministic=False):
        return {'checks': [r.as_dict(deterministic) for r in self.results],
                'summary': self.summary()}


def _result(name, model, ok, witness):
    if model.mutations:
        witness = dict(witness, mutations=list(model.mutations))
    return CheckResult(name, model.name, 'pass' if ok else 'fail', witness)


def _coords(model):
    if len(model.blocks) != 1:
        raise ValueError(f"{model.name} does not have a single projective block")
    return list(model.blocks[0])


# relations


def check_relations(model, options=None):
    """Every equation vanishes identically under the section substitution."""
    m = model.section_map
    failures = []
    for row, f in enumerate(model.polynomials, 1):
        residue = substitute(f, m)
        if residue:
            failures.append({'row': row, 'equation': model.equations[row - 1],
                             'remainder': format_poly(residue)})
    witness = {'rows': len(model.equations), 'vanishing': len(model.equations) - len(failures)}
    if failures:
        witness['first_failure'] = failures[0]
        witness['failing_rows'] = [f['row'] for f in failures]
    return _result('relations', model, not failures, witness)


@dataclass
class RelationSystem:
    """Coefficient-constrained relations of degree ``degree``.

    The unknowns are the products of an allowed base monomial with a
    degree ``degree`` monomial in the fiber coordinates; ``columns`` holds
    their images under the sections.
    """
    model: object
    degree: int
    unknowns: list
    columns: list
    index: dict

    @classmethod
    def build(cls, model, degree):
        variables = model.variables
        base = VariableSet(model.base_vars)
        nb = len(model.base_vars)
        coeffs = [parse_poly(c, base).LM for c in model.coefficient_monomials or ['1']]
        monos = monomials_of_degree(len(_coords(model)), degree)
        R = variables.ring()
        unknowns, columns, index = [], [], {}
        for q in monos:
            image = substitute(R.from_dict({(0,) * nb + q: QQ.one}), model.section_map)
            for c in coeffs:
                cpoly = model.section_map.ring.from_dict({c + (0,) * (len(model.parameter_variables) - nb): QQ.one})
                index[(c, q)] = len(unknowns)
                unknowns.append((c, q))
                columns.append(image * cpoly)
        return cls(model, degree, unknowns, columns, index)

    def matrix(self):
        return coefficient_matrix(self.columns).transpose()

    def vector(self, f):
        """Coordinates of f among the unknowns, or None outside the span."""
        nb = len(self.model.base_vars)
        v = [QQ.zero] * len(self.unknowns)
        for m, c in f.items():
            k = self.index.get((m[:nb], m[nb:]))
            if k is None:
                return None
            v[k] = c
        return v

    def image(self, v):
        R = self.model.section_map.ring
        total = R.zero
        for c, col in zip(v, self.columns):
            if c:
                total += col.mul_ground(c)
        return total

    def evaluate(self, v, point):
        """Vector on the fiber monomials with base monomials evaluated at point."""
        monos = sorted({q for _, q in self.unknowns})
        where = {q: i for i, q in enumerate(monos)}
        out = [QQ.zero] * len(monos)
        for (c, q), a in zip(self.unknowns, v):
            if a:
                value = QQ.one
                for x, e in zip(point, c):
                    value *= QQ(x) ** e
                out[where[q]] += a * value
        return out


def check_relation_space(model, options=None, degree=2):
    """The table spans the generic relation space inside the constrained one."""
    system = RelationSystem.build(model, degree)
    constrained = nullspace(system.matrix())
    vectors, outside, nonzero = [], [], []
    for row, f in enumerate(model.polynomials, 1):
        v = system.vector(f)
        if v is None:
            outside.append(row)
            continue
        if system.image(v):
            nonzero.append(row)
        vectors.append(v)
    table_rank = rank(ExactMatrix(vectors, QQ)) if vectors else 0
    generic_table_rank, point = 0, None
    for trial in GENERIC_TRIALS:
        r = rank(ExactMatrix([system.evaluate(v, trial) for v in vectors], QQ)) if vectors else 0
        if r > generic_table_rank:
            generic_table_rank, point = r, trial
        if r == len(vectors):
            break
    coords = _coords(model)
    image, certificate = image_rank(model.section_map, degree, coords, model.base_vars)
    generic_dim = len(monomials_of_degree(len(coords), degree)) - image
    witness = {
        'degree': degree, 'unknowns': len(system.unknowns),
        'constrained_dim': len(constrained), 'generic_dim': generic_dim,
        'generic_certificate': certificate, 'table_rows': len(model.equations),
        'table_rank': table_rank, 'table_generic_rank': generic_table_rank,
        'generic_rank_point': list(point) if point else None,
    }
    if outside:
        witness['rows_outside_constraints'] = outside
    if nonzero:
        witness['rows_not_in_nullspace'] = nonzero
    ok = not outside and not nonzero and table_rank == generic_dim \
        and generic_table_rank == generic_dim
    return _result('span', model, ok, witness)


@dataclass
class DerivedRelations:
    model: str
    degree: int
    relations: list
    generic_dim: int
    table_rank: int = 0
    combinations: dict = field(default_factory=dict)
    unexpressed: list = field(default_factory=list)


def derive_relations(model, degree=2, constrained=False):
    """Relations among the sections found from the sections alone.

    The generic basis comes from the kernel over QQ(base) in reduced row
    echelon form, each element scaled to polynomial coefficients; the
    constrained basis is the QQ-kernel of the coefficient-constrained system.
    Table rows of the same degree are written in the generic basis.
    """
    coords = _coords(model)
    monos = monomials_of_degree(len(coords), degree)
    variables = model.variables
    R = variables.ring()
    nb = len(model.base_vars)
    if constrained:
        system = RelationSystem.build(model, degree)
        basis = nullspace(system.matrix())
        texts = []
        for v in basis:
            f = R.from_dict({c + q: a for (c, q), a in zip(system.unknowns, v) if a})
            texts.append(format_poly(f))
        return DerivedRelations(model.name, degree, texts, len(basis))
    K = base_field(model.base_vars)
    target = model.parameter_variables
    base_idx = list(range(nb))
    fiber_idx = list(range(nb, len(target)))
    columns = [substitute(R.from_dict({(0,) * nb + q: QQ.one}), model.section_map) for q in monos]
    split = []
    for col in columns:
        s = {}
        for m, c in col.items():
            s.setdefault(tuple(m[i] for i in fiber_idx), {})[tuple(m[i] for i in base_idx)] = c
        split.append(s)
    fiber_monos = sorted({fm for s in split for fm in s})
    rows = [[base_element(K, s.get(fm, {})) for s in split] for fm in fiber_monos]
    kernel = nullspace(ExactMatrix(rows, K, col_labels=list(range(len(monos)))))
    relations, frees = [], []
    for v in kernel:
        free = next(i for i, a in enumerate(v) if a == K.one and
                    all(not w[i] for w in kernel if w is not v))
        scale = K.one
        if K != QQ:
            for a in v:
                if a:
                    scale = K.new(scale.numer.lcm(a.denom))
        scaled = [a * scale for a in v]
        terms = {}
        for q, a in zip(monos, scaled):
            if not a:
                continue
            if K == QQ:
                terms[(0,) * nb + q] = a
                continue
            den = a.denom.LC
            for bm, c in a.numer.items():
                terms[bm + q] = c / den
        f = R.from_dict(terms)
        _, f = f.clear_denoms()
        relations.append(f)
        frees.append(free)
    result = DerivedRelations(model.name, degree, [format_poly(f) for f in relations], len(kernel))
    table = [f for f in model.polynomials
             if all(sum(m[nb:]) == degree for m in f.keys())]
    if not table:
        return result
    result.table_rank = rank(ExactMatrix([_generic_vector(f, monos, K, nb) for f in table], K,
                                         col_labels=list(range(len(monos)))))
    gens_vectors = [_generic_vector(f, monos, K, nb) for f in relations]
    for row, f in enumerate(model.polynomials, 1):
        if all(sum(m[nb:]) == degree for m in f.keys()):
            vec = _generic_vector(f, monos, K, nb)
            coeffs = [vec[free] / g[free] for free, g in zip(frees, gens_vectors)]
            residual = [a - sum((c * g[i] for c, g in zip(coeffs, gens_vectors)), K.zero)
                        for i, a in enumerate(vec)]
            if any(residual):
                result.unexpressed.append(row)
                continue
            result.combinations[row] = [(j + 1, str(K.to_sympy(c))) for j, c in enumerate(coeffs) if c]
    return result


def _generic_vector(f, monos, K, nb):
    where = {q: i for i, q in enumerate(monos)}
    parts = {}
    for m, c in f.items():
        parts.setdefault(m[nb:], {})[m[:nb]] = c
    vec = [K.zero] * len(monos)
    for q, coeffs in parts.items():
        vec[where[q]] = base_element(K, coeffs)
    return vec


# freeness


def _solve_in_span(vectors, target, K):
    """Coefficients c with target = sum c_j vectors_j, or None."""
    monos = sorted({m for v in vectors + [target] for m in v.keys()})
    rows = [[v.get(m, K.zero) for v in vectors] + [target.get(m, K.zero)] for m in monos]
    if not rows:
        return [K.zero] * len(vectors)
    width = len(vectors) + 1
    rref, pivots = ExactMatrix(rows, K, col_labels=list(range(width))).domain_matrix().rref()
    if len(vectors) in pivots:
        return None
    entries = rref.to_list()
    coeffs = [K.zero] * len(vectors)
    for i, pc in enumerate(pivots):
        coeffs[pc] = entries[i][len(vectors)]
    return coeffs


def freeness_closure(model, claim, budget):
    """Normal forms of v*b over the parameter field of the subring lie in
    the span of the basis with polynomial coefficients."""
    K = parameter_field(*claim.subring)
    fiber, _ = specialization_setup(model, claim)
    R = VariableSet(fiber).ring(K)
    images = specialization_images(model, claim, list(K.gens), R)
    eqs = [g for g in (specialize(f, images, R) for f in model.polynomials) if g]
    G = buchberger(eqs, GREVLEX, budget)
    basis = [normal_form(specialize(parse_poly(b, model.variables), images, R), G, GREVLEX)
             for b in claim.basis]
    failures = []
    products = 0
    for name, g in zip(fiber, R.gens):
        for text, b in zip(claim.basis, basis):
            products += 1
            nf = normal_form(g * b, G, GREVLEX)
            coeffs = _solve_in_span(basis, nf, K)
            if coeffs is None:
                failures.append({'product': f"{name}*{text}", 'reason': 'outside the span'})
            elif any(not c.denom.is_ground for c in coeffs):
                failures.append({'product': f"{name}*{text}", 'reason': 'non-polynomial coefficient'})
            if len(failures) >= 5:
                break
    return {'products': products, 'groebner_size': len(G), 'failures': failures}


def check_freeness(model, options):
    claim = model.claims.freeness
    witness = {'subring': list(claim.subring), 'expected_rank': claim.expected_rank}
    closure_ok = None
    try:
        closure = freeness_closure(model, claim, options.closure_budget)
        closure_ok = not closure['failures']
        witness['closure'] = dict(closure, status='pass' if closure_ok else 'fail')
    except BudgetExceeded as e:
        logging.warning("freeness closure of %s skipped: %s", model.name, e)
        witness['closure'] = {'status': 'skipped', 'steps': e.steps, 'budget': e.budget,
                              'basis_size': e.basis_size}
    rank_ok = True
    scans = []
    for p in options.primes:
        mode = 'exhaustive' if p == 3 else 'sampled'
        scan = specialization_scan(model, claim, p, mode, options.samples, options.seed, options.budget)
        histogram = {}
        for point, dim in scan.dimensions.items():
            key = 'skipped' if dim is None else str(dim)
            histogram[key] = histogram.get(key, 0) + 1
        bad = [list(pt) for pt, dim in scan.dimensions.items()
               if dim is not None and (dim != claim.expected_rank
                                       or scan.basis_ranks[pt] != claim.expected_rank)]
        entry = {'prime': p, 'mode': mode, 'points': len(scan.dimensions),
                 'dimensions': histogram, 'skipped': len(scan.skipped)}
        if bad:
            pt = tuple(bad[0])
            entry['first_defect'] = {'point': bad[0], 'dimension': scan.dimensions[pt],
                                     'basis_rank': scan.basis_ranks[pt]}
        if bad or (scan.skipped and mode == 'exhaustive'):
            rank_ok = False
        scans.append(entry)
    witness['rank'] = scans
    if not rank_ok or closure_ok is False:
        return _result('freeness', model, False, witness)
    if closure_ok is None:
        return CheckResult('freeness', model.name, 'skipped', witness)
    return _result('freeness', model, True, witness)


# singularities


def _linear_rank(equations, variables, domain):
    """Jacobian rank at the origin: rank of the linear parts."""
    n = len(variables)
    units = [tuple(1 if k == i else 0 for k in range(n)) for i in range(n)]
    rows = [[f.get(u, domain.zero) for u in units] for f in equations]
    return jacobian_rank(rows, domain) if rows else 0


def _quadric(presentation, budget):
    """The single quadric spanned by the degree-2 parts, or a reason.

    The tangent cone of the local equations at the origin is computed as
    well; its degree-2 part must be spanned by the same quadric.
    """
    try:
        quads = quadratic_span(presentation.equations)
    except ValueError as e:
        return None, str(e), {}
    span = rank(coefficient_matrix(quads)) if quads else 0
    if span != 1:
        return None, f"degree-2 parts span a space of dimension {span}", {}
    local = Ideal(presentation.equations, presentation.variables, presentation.ring)
    cone = tangent_cone(local, {}, {}, presentation.domain, budget)
    degrees = [lowest_degree(g) for g in cone.generators]
    low = [g for g, d in zip(cone.generators, degrees) if d == 2]
    agrees = bool(low) and min(degrees) == 2 and rank(coefficient_matrix(low + quads[:1])) == 1
    witness = {'tangent_cone': [format_poly(g) for g in low], 'tangent_cone_agrees': agrees}
    if not agrees:
        return None, "tangent cone differs from the quadric in degree 2", witness
    return QuadraticForm.from_polynomial(quads[0], presentation.remaining), None, witness


class SingularityCertifier(ABC):
    """Decides one kind of singularity claim on a descended model."""
    kind = None

    @abstractmethod
    def certify(self, model, claim, options):
        """Witness dict with an ``ok`` entry.

        Args:
            model: the descended LocalModel.
            claim: a SingularityClaim of this certifier's kind.
            options: CheckOptions.
        """


class A1Transverse(SingularityCertifier):
    kind = 'A1-transverse'

    def certify(self, model, claim, options):
        K = parameter_field(*claim.params) if claim.params else QQ
        pres = local_eliminate(model.ideal, claim.point, claim.chart, K)
        jrank = _linear_rank(pres.original, pres.variables, K)
        witness = {'jacobian_rank': jrank, 'expected_jacobian_rank': model.smooth_rank - 1,
                   'eliminated': pres.eliminated, 'remaining': pres.remaining}
        form, reason, cone = _quadric(pres, options.budget)
        witness.update(cone)
        if form is None:
            return dict(witness, ok=False, reason=reason)
        witness.update(quadric=format_poly(form.polynomial), quadratic_rank=form.rank)
        witness['ok'] = jrank == model.smooth_rank - 1 and form.rank == claim.expected_rank
        return witness


class DInfinity(SingularityCertifier):
    kind = 'D-infinity'

    def certify(self, model, claim, options):
        pres = local_eliminate(model.ideal, claim.point, claim.chart, QQ)
        witness = {'eliminated': pres.eliminated, 'remaining': pres.remaining}
        form, reason, cone = _quadric(pres, options.budget)
        witness.update(cone)
        if form is None:
            return dict(witness, ok=False, reason=reason)
        witness.update(quadric=format_poly(form.polynomial), quadratic_rank=form.rank)
        f = next(g for g in pres.equations if homogeneous_part(g, 2))
        cubic = homogeneous_part(f, 3)
        names = list(pres.variables.names)
        defect = set(form.radical())
        mixed = None
        for m in sorted(cubic.keys(), reverse=True):
            support = {names[i]: e for i, e in enumerate(m) if e}
            if len(support) != 2:
                continue
            (b, eb), (d, ed) = sorted(support.items(), key=lambda t: t[1])
            if eb == 1 and ed == 2 and b in model.base_vars and b in defect and d in defect:
                mixed = f"{b}*{d}^2"
                break
        witness['mixed_cubic'] = mixed
        K = parameter_field(*claim.params) if claim.params else QQ
        try:
            line = local_eliminate(model.ideal, claim.line or {}, claim.chart, K)
            lrank = _linear_rank(line.original, line.variables, K)
            witness['line_jacobian_rank'] = lrank
        except PointNotOnVariety as e:
            return dict(witness, ok=False, reason=f"line not on the variety: {e}")
        witness['ok'] = form.rank == claim.expected_rank and mixed is not None \
            and lrank < model.smooth_rank
        return witness


class ToricChartIdentity(SingularityCertifier):
    kind = 'toric-chart-identity'

    def certify(self, model, claim, options):
        pres = local_eliminate(model.ideal, claim.point, claim.chart, QQ)
        expected = parse_poly(claim.equation, pres.variables)
        eqs = pres.equations
        witness = {'eliminated': pres.eliminated,
                   'local_equations': [format_poly(g) for g in eqs],
                   'expected': format_poly(expected)}
        witness['unit_multiple'] = len(eqs) == 1 and same_principal_ideal(eqs[0], expected)
        if not eqs:
            return dict(witness, ok=False)
        local = Ideal(eqs, pres.variables)
        theirs = Ideal([expected], pres.variables)
        forward = local.contains(expected, budget=options.budget)
        backward = all(theirs.contains(g, budget=options.budget) for g in eqs)
        witness.update(contains_expected=forward, expected_contains=backward)
        witness['ok'] = forward and backward
        return witness


def _determinant(rows):
    if len(rows) == 1:
        return rows[0][0]
    total = rows[0][0].ring.zero
    for j, a in enumerate(rows[0]):
        if a:
            total += (-1) ** j * a * _determinant([r[:j] + r[j + 1:] for r in rows[1:]])
    return total


def _minors(rows, size):
    """Nonzero size x size minors of a matrix of polynomials."""
    out = []
    for ri in combinations(range(len(rows)), size):
        for ci in combinations(range(len(rows[0])), size):
            d = _determinant([[rows[i][j] for j in ci] for i in ri])
            if d:
                out.append(d)
    return out


class SmoothTotalSpace(SingularityCertifier):
    """Jacobian criterion on the variety.

    The equations and the maximal minors of the Jacobian cut out the
    singular locus of the affine cone; saturating by one variable of each
    projective block removes the irrelevant part. The total space is smooth
    when every such saturation is the unit ideal.
    """
    kind = 'smooth-total-space'

    def certify(self, model, claim, options):
        names = list(model.variables.names)
        polys = model.polynomials
        codim = model.smooth_rank
        R = model.variables.ring(QQ)
        jac = [[f.diff(g) for g in R.gens] for f in polys]
        K = base_field(names)
        r = jacobian_rank([[base_element(K, dict(d.items())) for d in row] for row in jac], K)
        witness = {'generic_jacobian_rank': r, 'codim': codim}
        if r != codim:
            return dict(witness, ok=False)
        J = Ideal(polys + _minors(jac, codim), model.variables, R)
        used = {names[i] for g in J.generators for m in g.keys() for i, e in enumerate(m) if e}
        blocks = [b for b in model.blocks if used & set(b)]
        gens = dict(zip(names, R.gens))
        singular = []
        charts = 0
        for chart in product(*blocks):
            charts += 1
            h = R.one
            for v in chart:
                h *= gens[v]
            if not saturate(J, h, options.budget).is_unit:
                singular.append(list(chart))
        logging.debug("%s: %d charts, singular on %s", model.name, charts, singular)
        return dict(witness, charts=charts, singular_charts=singular, ok=not singular)


CERTIFIERS = {c.kind: c() for c in (A1Transverse, DInfinity, ToricChartIdentity, SmoothTotalSpace)}


def check_singularities(model, options):
    m = model.descended()
    claims = []
    status = 'pass'
    for claim in model.claims.singularities:
        entry = {'kind': claim.kind, 'label': claim.label}
        try:
            w = CERTIFIERS[claim.kind].certify(m, claim, options)
            ok = w.pop('ok')
            entry.update(w, status='pass' if ok else 'fail')
            if not ok:
                status = 'fail'
        except BudgetExceeded as e:
            logging.warning("%s claim %r of %s skipped: %s", claim.kind, claim.label, model.name, e)
            entry.update(status='skipped', steps=e.steps, budget=e.budget)
            if status == 'pass':
                status = 'skipped'
        except PointNotOnVariety as e:
            entry.update(status='fail', reason=str(e))
            status = 'fail'
        claims.append(entry)
    loci = [[parse_poly(t, m.variables) for t in c.locus]
            for c in model.claims.singularities if c.locus]
    scans = []
    for p in options.primes:
        points, mode = scan_base_points(m, p, options.scan_samples, options.seed)
        size = len(points) * Ambient.of(m).fiber_count(p)
        if size > options.scan_limit:
            scans.append({'prime': p, 'mode': 'not scanned', 'points': size})
            continue
        scan = smoothness_scan(model, p, options.scan_samples, options.seed, base_points=points)
        off = [pt for pt, _ in scan.singular if not on_locus(pt, scan.names, loci, p)]
        entry = {'prime': p, 'mode': mode, 'examined': scan.examined,
                 'on_variety': scan.on_variety, 'singular': len(scan.singular),
                 'off_locus': len(off)}
        if off:
            entry['first_off_locus'] = list(off[0])
            status = 'fail'
        scans.append(entry)
    witness = {'claims': claims, 'scans': scans}
    if status == 'skipped':
        return CheckResult('singular', model.name, 'skipped', witness)
    return _result('singular', model, status == 'pass', witness)


# flatness


def _hilbert(model, degree, values=None, domain=QQ):
    spec = 'generic' if values is None else dict(values, domain=domain)
    return graded_piece_dim(model.polynomials, model.variables, model.tags, degree, spec)


def _components_contain_fiber(m, claim, budget):
    at = substitution_map(m.variables, {k: int(v) for k, v in claim.point.items()})
    fiber = [g for g in (substitute(f, at) for f in m.polynomials) if g]
    found = []
    for gens in claim.components:
        component = Ideal([parse_poly(t, m.variables) for t in gens], m.variables)
        found.append(all(component.contains(g, budget=budget) for g in fiber))
    return found


def check_flatness(model, options):
    """Fiber Hilbert values at every base point over each prime agree with
    the generic ones."""
    m = model.descended()
    base = list(m.base_vars)
    degrees = list(range(1, options.dmax + 1))
    tables = []
    lowest = {d: None for d in degrees}
    mismatched = []
    for p in options.primes:
        F = prime_field(p)
        histogram = {}
        values = {}
        for b in product(range(p), repeat=len(base)):
            hs = tuple(_hilbert(m, d, dict(zip(base, b)), F) for d in degrees)
            values[b] = hs
            key = ','.join(map(str, hs))
            histogram[key] = histogram.get(key, 0) + 1
            for d, h in zip(degrees, hs):
                lowest[d] = h if lowest[d] is None else min(lowest[d], h)
        tables.append({'prime': p, 'values': histogram, 'points': values})
    generic, certificates = {}, {}
    constant = all(len(t['values']) == 1 for t in tables) and \
        len({next(iter(t['values'])) for t in tables}) <= 1
    for d in degrees:
        if model.section_map is not None and len(model.blocks) == 1:
            bound, _ = image_rank(model.section_map, d, model.blocks[0], model.base_vars)
            if lowest[d] == bound:
                generic[d], certificates[d] = bound, 'specialization-sandwich'
                continue
        if not constant and model.section_map is not None:
            continue
        generic[d], certificates[d] = _hilbert(m, d), 'fraction-field'
    reference = dict(generic)
    for d in degrees:
        if d not in reference:
            seen = [hs[d - 1] for t in tables for hs in t['points'].values()]
            reference[d] = max(sorted(set(seen)), key=seen.count) if seen else None
    for t in tables:
        for b, hs in t['points'].items():
            if any(reference[d] != h for d, h in zip(degrees, hs)):
                mismatched.append({'prime': t['prime'], 'point': list(b), 'values': list(hs)})
    claims = []
    for claim in model.claims.fibers:
        if not claim.hilbert and not claim.components:
            continue
        n = min(len(claim.hilbert), options.dmax)
        point = {k: QQ(int(v)) for k, v in claim.point.items()}
        hs = [_hilbert(m, d, point) for d in range(1, n + 1)]
        entry = {'point': dict(claim.point), 'claimed': claim.hilbert[:n], 'computed': hs}
        claims.append(entry)
        if hs != list(claim.hilbert[:n]):
            mismatched.append({'point': dict(claim.point), 'values': hs, 'claimed': claim.hilbert[:n]})
        if claim.components:
            entry['components'] = _components_contain_fiber(m, claim, options.budget)
            if not all(entry['components']):
                mismatched.append({'point': dict(claim.point), 'components': entry['components']})
    witness = {
        'degrees': degrees,
        'generic': {str(d): generic.get(d) for d in degrees},
        'certificates': {str(d): certificates.get(d) for d in degrees},
        'primes': [{'prime': t['prime'], 'values': t['values']} for t in tables],
        'claims': claims,
    }
    if mismatched:
        witness['mismatches'] = mismatched[:5]
        witness['mismatch_count'] = len(mismatched)
    ok = not mismatched and all(generic.get(d) is not None for d in degrees)
    return _result('flatness', model, ok, witness)


# identities


def _ratio_text(f, g, variables):
    K = base_field(variables.names)
    if not g:
        return None
    ratio = base_element(K, dict(f.items())) / base_element(K, dict(g.items()))
    return str(K.to_sympy(ratio))


def check_identities(model, options=None):
    claims = []
    ok = True
    for claim in model.claims.identities:
        maps = [spec.polymap for spec in claim.chain]
        composite = maps[0]
        for nxt in maps[1:]:
            composite = composite.then(nxt)
        target = composite.target
        scale = parse_poly(claim.scale, target)
        rhs = [parse_poly(t, target) for t in claim.rhs]
        compared = [n for n in composite.source.names if n not in target]
        entry = {'name': claim.name, 'components': len(compared), 'scale': claim.scale}
        if len(compared) != len(rhs):
            entry['reason'] = f"{len(rhs)} right-hand sides for {len(compared)} components"
            ok = False
            claims.append(entry)
            continue
        for name, r in zip(compared, rhs):
            lhs = composite.image(name)
            expected = scale * r
            if lhs != expected:
                entry['first_mismatch'] = {'component': name, 'lhs': format_poly(lhs),
                                           'expected': format_poly(expected),
                                           'residual_factor': _ratio_text(lhs, expected, target)}
                ok = False
                break
        last = maps[-1]
        residues = []
        for text in claim.pullbacks:
            f = parse_poly(text, last.source)
            image = substitute(f, last)
            if image:
                residues.append({'pullback': text, 'image': format_poly(image)})
        entry['pullbacks'] = len(claim.pullbacks)
        if residues:
            entry['nonzero_pullbacks'] = residues
            ok = False
        claims.append(entry)
    return _result('identities', model, ok, {'identities': claims})


# fiber counts


def count_at(model, base_point, p, counts):
    """Enumerated fiber count against a closed form in p."""
    n = fiber_count(model, base_point, p)
    expected = claimed_count(counts, p)
    return {'point': dict(base_point), 'prime': p, 'count': n, 'expected': expected,
            'formula': counts, 'ok': n == expected}


def check_fiber_counts(model, options):
    m = model.descended()
    explicit = []
    ok = True
    for claim in model.claims.fibers:
        if not claim.counts:
            continue
        for p in options.primes:
            entry = count_at(model, claim.point, p, claim.counts)
            ok = ok and entry.pop('ok')
            explicit.append(entry)
    formula = []
    if model.fiber_formula:
        for p in options.primes:
            scan = enumerate_points(m.polynomials, Ambient.of(m), p)
            bad = []
            for b, n in scan.per_base.items():
                expected = formula_count(model, dict(zip(m.base_vars, b)), p)
                if n != expected:
                    bad.append({'point': list(b), 'count': n, 'expected': expected})
            formula.append({'prime': p, 'base_points': len(scan.per_base),
                            'mismatches': bad[:5]})
            ok = ok and not bad
    return _result('counts', model, ok, {'explicit': explicit, 'formula': formula})


@dataclass(frozen=True)
class Check:
    name: str
    run: object
    applies: object
    description: str


def _has_sections(model):
    return model.sections is not None


CHECKS = {c.name: c for c in (
    Check('relations', check_relations, _has_sections,
          'equations vanish under the sections'),
    Check('span', check_relation_space,
          lambda m: _has_sections(m) and bool(m.coefficient_monomials) and len(m.blocks) == 1,
          'table spans the constrained relation space'),
    Check('freeness', check_freeness, lambda m: m.claims.freeness is not None,
          'coordinate ring is free over the subring'),
    Check('singular', check_singularities, lambda m: bool(m.claims.singularities),
          'singular locus and singularity types'),
    Check('flatness', check_flatness, lambda m: bool(m.equations) and bool(m.blocks),
          'fiber Hilbert values are constant'),
    Check('identities', check_identities, lambda m: bool(m.claims.identities),
          'polynomial identities between maps'),
    Check('counts', check_fiber_counts,
          lambda m: bool(m.fiber_formula) or any(f.counts for f in m.claims.fibers),
          'fiber point counts match closed forms'),
)}


def run_check(model, name, options):
    """Run one check, timing it and turning budget overruns into skips."""
    check = CHECKS[name]
    logging.info("check %s on %s started", name, model.name)
    start = time.perf_counter()
    try:
        result = check.run(model, options)
    except BudgetExceeded as e:
        logging.warning("check %s on %s skipped: %s", name, model.name, e)
        result = CheckResult(name, model.name, 'skipped',
                             {'steps': e.steps, 'budget': e.budget, 'basis_size': e.basis_size})
    result.millis = int(round((time.perf_counter() - start) * 1000))
    logging.info("check %s on %s: %s in %d ms", name, model.name, result.status, result.millis)
    return result


def _init_worker(store):
    set_basis_store(store)


def _run_task(task):
    document, name, options = task
    return run_check(model_from_dict(document), name, options)


def plan(models, checks):
    """(model, check) pairs in registry order that apply."""
    return [(model, name) for model in models for name in CHECKS
            if name in checks and CHECKS[name].applies(model)]


def run_suite(models, checks, options, jobs=1, store=None):
    """Run the applicable checks on every model, in a worker pool when
    ``jobs`` > 1; results keep registry order."""
    tasks = plan(models, checks)
    if jobs > 1 and len(tasks) > 1:
        payload = [(model_to_dict(model), name, options) for model, name in tasks]
        with multiprocessing.Pool(min(jobs, len(tasks)), _init_worker, (store,)) as pool:
            results = pool.map(_run_task, payload)
    else:
        results = [run_check(model, name, options) for model, name in tasks]
    environment = {'primes': list(options.primes), 'budget': options.budget,
                   'closure_budget': options.closure_budget, 'dmax': options.dmax,
                   'seed': options.seed}
    return VerificationReport(results, environment)
