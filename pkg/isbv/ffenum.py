"""Brute-force point enumeration over GF(p).

Points of a product of projective spaces are normalized so that the first
nonzero coordinate of each block is 1, and are produced in numpy chunks.
Equations are compiled once to exponent and coefficient arrays and
evaluated on whole chunks; rows are dropped as soon as one equation fails,
and Jacobian ranks are computed only at points on the variety.
"""
import logging
import time
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from sympy import QQ, legendre_symbol

from isbv.algebra import (VariableSet, convert_coefficient, count_expression,
                          parse_poly, prime_field, to_ring)
from isbv.groebner import (DEFAULT_BUDGET, GREVLEX, BudgetExceeded, buchberger,
                           normal_form, staircase)
from isbv.linalg import rank_mod_p

CHUNK_ROWS = 1 << 17
EXHAUSTIVE_FIBER_LIMIT = 20000


def projective_count(n, p):
    """Number of points of P^n over GF(p)."""
    return (p ** (n + 1) - 1) // (p - 1)


def _grid(m, p):
    if m == 0:
        return np.zeros((1, 0), dtype=np.int64)
    return np.indices((p,) * m, dtype=np.int64).reshape(m, -1).T


def projective_chunks(n, p, max_rows=CHUNK_ROWS):
    """Arrays of normalized points covering P^n exactly once."""
    for k in range(n + 1):
        m = n - k
        j = m
        while j > 0 and p ** j > max_rows:
            j -= 1
        tail = _grid(j, p)
        for prefix in product(range(p), repeat=m - j):
            head = np.zeros((len(tail), k + 1 + len(prefix)), dtype=np.int64)
            head[:, k] = 1
            if prefix:
                head[:, k + 1:] = prefix
            yield np.hstack([head, tail])


@dataclass
class ProjectivePointIterator:
    """Rational points of P^{n_1} x ... x P^{n_k} over GF(p).

    Attributes:
        sizes: number of homogeneous coordinates of each block.
        p: the prime.
    """
    sizes: list
    p: int
    max_rows: int = CHUNK_ROWS

    def __len__(self):
        total = 1
        for s in self.sizes:
            total *= projective_count(s - 1, self.p)
        return total

    def __iter__(self):
        if not self.sizes:
            yield np.zeros((1, 0), dtype=np.int64)
            return
        if len(self.sizes) == 1:
            yield from projective_chunks(self.sizes[0] - 1, self.p, self.max_rows)
            return
        rest = [np.vstack(list(projective_chunks(s - 1, self.p))) for s in self.sizes[1:]]
        tail = rest[0]
        for block in rest[1:]:
            tail = np.hstack([np.repeat(tail, len(block), axis=0),
                              np.tile(block, (len(tail), 1))])
        step = max(1, self.max_rows // len(tail))
        for chunk in projective_chunks(self.sizes[0] - 1, self.p):
            for i in range(0, len(chunk), step):
                head = chunk[i:i + step]
                yield np.hstack([np.repeat(head, len(tail), axis=0),
                                 np.tile(tail, (len(head), 1))])


class CompiledPoly:
    """A polynomial reduced mod p, evaluated on arrays of points."""

    def __init__(self, f, p):
        self.p = p
        domain = f.ring.domain
        F = prime_field(p)
        terms = []
        for m, c in f.items():
            r = int(F.to_int(convert_coefficient(c, domain, F))) % p
            if r:
                terms.append((r, [(i, e) for i, e in enumerate(m) if e]))
        self.terms = terms
        self.max_exp = max((e for _, t in terms for _, e in t), default=1)

    def __call__(self, X, powers=None):
        p = self.p
        if powers is None:
            powers = power_table(X, self.max_exp, p)
        out = np.zeros(len(X), dtype=np.int64)
        for c, factors in self.terms:
            term = np.full(len(X), c, dtype=np.int64)
            for i, e in factors:
                term = term * powers[e][:, i] % p
            out = (out + term) % p
        return out


def power_table(X, max_exp, p):
    powers = [np.ones_like(X), X % p]
    for _ in range(2, max_exp + 1):
        powers.append(powers[-1] * X % p)
    return powers


@dataclass
class Ambient:
    """Affine base coordinates times projective blocks."""
    base: list
    blocks: list

    @property
    def variables(self):
        tags = [('base', self.base)] if self.base else []
        tags += [(f"P{i}", b) for i, b in enumerate(self.blocks)]
        return VariableSet(list(self.base) + [n for b in self.blocks for n in b], tags)

    @classmethod
    def of(cls, model):
        return cls(list(model.base_vars), [list(b) for b in model.blocks])

    def fiber_count(self, p):
        return len(ProjectivePointIterator([len(b) for b in self.blocks], p))


@dataclass
class ScanResult:
    """Outcome of an enumeration.

    Attributes:
        prime: the field characteristic.
        examined: number of ambient points tested.
        on_variety: number of points where all equations vanish.
        singular: ``(point, rank)`` pairs with Jacobian rank below the smooth rank.
        seconds: wall time.
        per_base: base point -> number of points on the variety over it.
        names: coordinate names matching the point tuples.
    """
    prime: int
    examined: int = 0
    on_variety: int = 0
    singular: list = field(default_factory=list)
    seconds: float = 0.0
    per_base: dict = field(default_factory=dict)
    names: list = field(default_factory=list)
    mode: str = 'exhaustive'

    def as_dict(self):
        return {
            'prime': self.prime, 'examined': self.examined, 'on_variety': self.on_variety,
            'singular': [{'point': list(pt), 'rank': r} for pt, r in self.singular],
            'per_base': {','.join(map(str, b)): n for b, n in self.per_base.items()},
        }


def _check_prime(p):
    p = int(p)
    if p == 2:
        raise ValueError("characteristic 2 is not supported")
    prime_field(p)
    return p


def enumerate_points(equations, ambient, p, base_points=None, smooth_rank=None):
    """Count the GF(p) points of V(equations) in ``ambient``.

    Args:
        equations: polynomials over QQ or GF(p) in ``ambient.variables``.
        ambient: an :class:`Ambient`.
        p: odd prime.
        base_points: tuples of base values to restrict to; all of GF(p)^n
            when omitted.
        smooth_rank: when given, the Jacobian rank is computed at every
            point on the variety and points of lower rank are reported.
    """
    p = _check_prime(p)
    start = time.perf_counter()
    variables = ambient.variables
    if equations:
        R = variables.ring(equations[0].ring.domain)
        equations = [to_ring(f, R) for f in equations]
    compiled = [CompiledPoly(f, p) for f in equations]
    max_exp = max([c.max_exp for c in compiled] + [1])
    jac = None
    if smooth_rank is not None and equations:
        gens = R.gens
        jac = [[CompiledPoly(f.diff(g), p) for g in gens] for f in equations]
        max_exp = max([max_exp] + [c.max_exp for row in jac for c in row])
    nb = len(ambient.base)
    if base_points is None:
        base_points = list(product(range(p), repeat=nb))
    fibers = ProjectivePointIterator([len(b) for b in ambient.blocks], p)
    result = ScanResult(p, names=list(variables.names))
    for b in base_points:
        b = tuple(int(v) % p for v in b)
        count = 0
        for chunk in fibers:
            X = np.hstack([np.tile(np.array(b, dtype=np.int64), (len(chunk), 1)), chunk]) \
                if nb else chunk
            result.examined += len(X)
            for f in compiled:
                if not len(X):
                    break
                X = X[f(X) == 0]
            count += len(X)
            if jac is not None and len(X):
                powers = power_table(X, max_exp, p)
                values = np.stack([np.stack([d(X, powers) for d in row], axis=1) for row in jac], axis=1)
                for point, J in zip(X, values):
                    r = rank_mod_p(J, p)
                    if r < smooth_rank:
                        result.singular.append((tuple(int(v) for v in point), r))
        result.per_base[b] = count
        result.on_variety += count
    result.seconds = time.perf_counter() - start
    logging.debug("enumerated %d points over GF(%d): %d on the variety, %d singular",
                  result.examined, p, result.on_variety, len(result.singular))
    return result


def scan_base_points(model, p, scan_samples=4, seed=42):
    """Base points for a smoothness scan of the (descended) ``model``.

    Exhaustive when the fibers are small; otherwise the points on the
    coordinate axes plus ``scan_samples`` random points off them.
    """
    nb = len(model.base_vars)
    everything = list(product(range(p), repeat=nb))
    if Ambient.of(model).fiber_count(p) <= EXHAUSTIVE_FIBER_LIMIT:
        return everything, 'exhaustive'
    on_axes = [b for b in everything if 0 in b]
    off = [b for b in everything if 0 not in b]
    rng = np.random.default_rng(seed)
    k = min(scan_samples, len(off))
    picks = sorted(rng.choice(len(off), size=k, replace=False).tolist()) if k else []
    return on_axes + [off[i] for i in picks], 'divisors+sampled'


def smoothness_scan(model, p, scan_samples=4, seed=42, base_points=None):
    """Singular GF(p)-points of the total space of ``model``."""
    m = model.descended()
    mode = 'given'
    if base_points is None:
        base_points, mode = scan_base_points(m, p, scan_samples, seed)
    result = enumerate_points(m.polynomials, Ambient.of(m), p, base_points, m.smooth_rank)
    result.mode = mode
    logging.info("smoothness scan of %s over GF(%d) (%s): %d singular points",
                 model.name, p, mode, len(result.singular))
    return result


def fiber_count(model, base_point, p):
    """Number of GF(p)-points of the fiber of ``model`` over ``base_point``."""
    m = model.descended()
    if isinstance(base_point, dict):
        base_point = [base_point[n] for n in m.base_vars]
    b = tuple(int(v) for v in base_point)
    result = enumerate_points(m.polynomials, Ambient.of(m), p, [b])
    return result.on_variety


def on_locus(point, names, loci, p):
    """True if ``point`` lies on one of ``loci`` (lists of polynomials)."""
    X = np.array([point], dtype=np.int64)
    R = None
    for locus in loci:
        ok = True
        for f in locus:
            if R is None:
                R = VariableSet(names).ring(f.ring.domain)
            if CompiledPoly(to_ring(f, R), p)(X)[0]:
                ok = False
                break
        if ok:
            return True
    return False


def conic_count(a, b, c, p):
    """Points over GF(p) of the plane conic a*z0^2 + b*z1^2 + c*z2^2."""
    coeffs = [int(v) % p for v in (a, b, c)]
    nonzero = [v for v in coeffs if v]
    if len(nonzero) == 3:
        return p + 1
    if len(nonzero) == 2:
        u, w = nonzero
        return 2 * p + 1 if legendre_symbol(-u * w % p, p) == 1 else 1
    if len(nonzero) == 1:
        return p + 1
    return p * p + p + 1


def formula_count(model, base_point, p):
    """Closed-form fiber count from the model's ``fiber_formula``."""
    formula = model.fiber_formula
    if not formula:
        return None
    base = VariableSet(model.descended().base_vars)
    values = {n: QQ(int(base_point[n])) for n in base.names}
    total = (p + 1) ** int(formula.get('lines', 0))
    for conic in formula.get('conics', []):
        coeffs = []
        for text in conic:
            f = parse_poly(text, base)
            v = QQ.zero
            for m, c in f.items():
                term = c
                for n, e in zip(base.names, m):
                    term *= values[n] ** e
                v += term
            coeffs.append(int(v))
        total *= conic_count(*coeffs, p)
    return total


def claimed_count(text, p):
    return count_expression(text)(p)


@dataclass
class SpecializationScan:
    """Quotient dimensions at specializations of a freeness subring.

    ``dimensions`` maps each specialization to the GF(p)-dimension of the
    quotient (None when skipped on budget); ``basis_ranks`` to the rank of
    the claimed basis in it.
    """
    prime: int
    mode: str
    dimensions: dict = field(default_factory=dict)
    basis_ranks: dict = field(default_factory=dict)
    skipped: list = field(default_factory=list)


def specialization_setup(model, claim):
    """Names of the fiber variables and, per subring name, the coordinate it
    pins down together with the linear form defining it."""
    variables = model.variables
    solved = {}
    for name in claim.subring:
        if name in variables:
            solved[name] = (name, None)
            continue
        if name not in claim.defined_vars:
            raise ValueError(f"subring variable {name!r} is neither a coordinate nor defined")
        L = parse_poly(claim.defined_vars[name], variables)
        if any(sum(m) != 1 for m in L.keys()):
            raise ValueError(f"{name} = {claim.defined_vars[name]} is not a linear form")
        pivot = next(n for n, m in zip(variables.names, zip(*L.keys()))
                     if any(m) and n not in {s for s, _ in solved.values()})
        solved[name] = (pivot, L)
    pinned = {s for s, _ in solved.values()}
    fiber = [n for n in variables.names if n not in pinned]
    return fiber, solved


def specialization_images(model, claim, values, R):
    """Images of the model coordinates in ``R`` (a ring in the fiber
    variables) when the subring generators take ``values``; values are ints
    or elements of the ground domain of ``R``."""
    F = R.domain
    variables = model.variables
    fiber, solved = specialization_setup(model, claim)
    gens = dict(zip(fiber, R.gens))

    def ground(value):
        return R(F(value) if isinstance(value, int) else value)

    images = {}
    for name, value in zip(claim.subring, values):
        pivot, L = solved[name]
        if L is None:
            images[pivot] = ground(value)
    for name, value in zip(claim.subring, values):
        pivot, L = solved[name]
        if L is None:
            continue
        idx = variables.index(pivot)
        rest = ground(value)
        for m, c in L.items():
            i = m.index(1)
            cf = convert_coefficient(c, L.ring.domain, F)
            if i == idx:
                lead = cf
                continue
            n = variables.names[i]
            rest -= cf * (images[n] if n in images else gens[n])
        images[pivot] = rest.mul_ground(F.one / lead)
    images.update({n: gens[n] for n in fiber})
    return [images[n] for n in variables.names]


def specialize(f, images, R):
    """f with the model coordinates replaced by ``images``."""
    out = R.zero
    for m, c in f.items():
        term = R(convert_coefficient(c, f.ring.domain, R.domain))
        for g, e in zip(images, m):
            if e:
                term *= g ** e
        out += term
    return out


def specialized_quotient(model, claim, values, p, budget=DEFAULT_BUDGET):
    """``(dimension, basis_rank)`` of the quotient at subring values ``values``.

    The dimension is the staircase size of a reduced basis over GF(p) (None
    when the quotient is infinite dimensional); basis_rank is the rank of
    the normal forms of the claimed basis.
    """
    F = prime_field(p)
    fiber, _ = specialization_setup(model, claim)
    R = VariableSet(fiber).ring(F)
    images = specialization_images(model, claim, values, R)
    eqs = [g for g in (specialize(f, images, R) for f in model.polynomials) if g]
    G = buchberger(eqs, GREVLEX, budget) if eqs else []
    dim = staircase(G, GREVLEX) if G else None
    basis = [specialize(parse_poly(b, model.variables), images, R) for b in claim.basis]
    nfs = [normal_form(b, G, GREVLEX) if G else b for b in basis]
    monos = sorted({m for f in nfs for m in f.keys()})
    index = {m: i for i, m in enumerate(monos)}
    M = np.zeros((len(nfs), len(monos)), dtype=np.int64)
    for r, f in enumerate(nfs):
        for m, c in f.items():
            M[r, index[m]] = int(F.to_int(c)) % p
    return dim, rank_mod_p(M, p)


def specialization_scan(model, claim, p, mode='exhaustive', samples=500, seed=42,
                        budget=DEFAULT_BUDGET):
    """Quotient dimension at every (or ``samples`` distinct random)
    specializations of the subring variables over GF(p)."""
    p = _check_prime(p)
    n = len(claim.subring)
    if mode == 'exhaustive' or samples >= p ** n:
        points = list(product(range(p), repeat=n))
    else:
        rng = np.random.default_rng(seed)
        drawn = {}
        while len(drawn) < samples:
            for row in rng.integers(0, p, size=(samples - len(drawn), n)):
                drawn.setdefault(tuple(int(v) for v in row), None)
        points = list(drawn)
    scan = SpecializationScan(p, mode)
    for point in points:
        try:
            dim, brank = specialized_quotient(model, claim, point, p, budget)
        except BudgetExceeded as e:
            logging.warning("specialization %s over GF(%d) skipped: %s", point, p, e)
            scan.dimensions[point] = None
            scan.skipped.append(point)
            continue
        scan.dimensions[point] = dim
        scan.basis_ranks[point] = brank
    logging.info("specialization scan of %s over GF(%d): %d points (%s)",
                 model.name, p, len(points), mode)
    return scan

