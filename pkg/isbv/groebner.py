"""Monomial orders, normal forms and Buchberger's algorithm.

The certificate engine for the model checks: reduced Groebner bases,
membership, elimination, saturation, tangent cones and the chart-local
substitution elimination used for singularity types.
"""
import logging
import threading
from dataclasses import dataclass, field

from sympy import sympify
from sympy.polys.orderings import grevlex, lex

from isbv.algebra import (VariableSet, change_domain, substitute,
                          substitution_map, to_ring)

DEFAULT_BUDGET = 10 ** 6

_SUBORDERS = {'lex': lex, 'grevlex': grevlex}


class BudgetExceeded(RuntimeError):
    """Raised when Buchberger's algorithm runs out of pair reductions."""

    def __init__(self, steps, budget, basis_size=0):
        super().__init__(
            f"Groebner basis computation exceeded its budget of {budget} "
            f"pair reductions (basis size {basis_size})")
        self.steps = steps
        self.budget = budget
        self.basis_size = basis_size


class PointNotOnVariety(ValueError):
    pass


@dataclass(frozen=True)
class MonomialOrder:
    """A monomial order given as a sort key on exponent tuples.

    ``kind`` is ``lex``, ``grevlex``, ``block`` or ``tangent``. Block orders
    compare the blocks in sequence, each with its own order; ``blocks`` holds
    ``(kind, indices)`` pairs. The tangent order on a homogenized ring compares
    total degree, then the power of the homogenizing variable at index
    ``h``, then grevlex on the rest, so that after dehomogenization the
    leading monomial is a lowest-degree term.
    """
    kind: str = 'grevlex'
    blocks: tuple = ()
    h: int = -1

    def __call__(self, monom):
        if self.kind in _SUBORDERS:
            return _SUBORDERS[self.kind](monom)
        if self.kind == 'block':
            return tuple(_SUBORDERS[k](tuple(monom[i] for i in idx))
                         for k, idx in self.blocks)
        if self.kind == 'tangent':
            rest = monom[:self.h] + monom[self.h + 1:]
            return (sum(monom), monom[self.h], grevlex(rest))
        raise ValueError(f"unknown monomial order {self.kind!r}")

    def __str__(self):
        if self.kind == 'block':
            inner = ';'.join(f"{k}:{','.join(map(str, idx))}" for k, idx in self.blocks)
            return f"block({inner})"
        if self.kind == 'tangent':
            return f"tangent({self.h})"
        return self.kind

    @classmethod
    def block(cls, variables, first, first_kind='grevlex', rest_kind='grevlex'):
        """Block order with the variables ``first`` dominant."""
        first = [n for n in variables.names if n in set(first)]
        rest = [n for n in variables.names if n not in set(first)]
        blocks = ((first_kind, tuple(variables.index(n) for n in first)),
                  (rest_kind, tuple(variables.index(n) for n in rest)))
        return cls('block', tuple(b for b in blocks if b[1]))


LEX = MonomialOrder('lex')
GREVLEX = MonomialOrder('grevlex')


def leading_term(f, order):
    return max(f.items(), key=lambda t: order(t[0]))


def leading_monomial(f, order):
    return max(f.keys(), key=order)


def monic(f, order):
    if not f:
        return f
    _, lc = leading_term(f, order)
    return f.quo_ground(lc)


def normal_form(f, basis, order):
    """Fully reduced remainder of f on division by ``basis``."""
    basis = [g for g in basis if g]
    if not f or not basis:
        return f
    R = f.ring
    domain = R.domain
    leads = [leading_term(g, order) + (g,) for g in basis]
    p = f
    r = R.zero
    while p:
        m, c = leading_term(p, order)
        for lm, lc, g in leads:
            q = R.monomial_div(m, lm)
            if q is not None:
                p = p - g.mul_term((q, domain.quo(c, lc)))
                break
        else:
            t = R.term_new(m, c)
            r = r + t
            p = p - t
    return r


def spoly(f, g, lmf, lmg):
    """S-polynomial of monic f and g."""
    R = f.ring
    lcm = R.monomial_lcm(lmf, lmg)
    return f.mul_monom(R.monomial_div(lcm, lmf)) - g.mul_monom(R.monomial_div(lcm, lmg))


def _update(G, lmG, P, f, lmf, order):
    """Gebauer-Moeller pair update when f joins the basis G."""
    R = f.ring
    lcm = R.monomial_lcm
    mul = R.monomial_mul
    div = R.monomial_div
    P = {p for p in P if (not div(lcm(lmG[p[0]], lmG[p[1]]), lmf) or
                          lcm(lmG[p[0]], lmG[p[1]]) == lcm(lmG[p[0]], lmf) or
                          lcm(lmG[p[0]], lmG[p[1]]) == lcm(lmG[p[1]], lmf))}
    lcm_dict = {}
    for i in range(len(G)):
        lcm_dict.setdefault(lcm(lmG[i], lmf), []).append(i)
    minimal = []
    for L in sorted(lcm_dict, key=order):
        if all(not div(L, L_) for L_ in minimal):
            minimal.append(L)
    new = set()
    for L in minimal:
        if not any(lcm(lmG[i], lmf) == mul(lmG[i], lmf) for i in lcm_dict[L]):
            new.add((min(lcm_dict[L]), len(G)))
    return P | new


def _sugar(f):
    return max(sum(m) for m in f.keys())


def _minimalize(G, order):
    R = G[0].ring
    out = []
    for g in sorted(G, key=lambda h: order(leading_monomial(h, order))):
        lm = leading_monomial(g, order)
        if all(R.monomial_div(lm, leading_monomial(h, order)) is None for h in out):
            out.append(g)
    return out


def _interreduce(G, order):
    reduced = []
    for i, g in enumerate(G):
        r = normal_form(g, G[:i] + G[i + 1:], order)
        reduced.append(monic(r, order))
    return sorted(reduced, key=lambda h: order(leading_monomial(h, order)), reverse=True)


def buchberger(gens, order=GREVLEX, budget=DEFAULT_BUDGET):
    """Reduced Groebner basis of the ideal generated by ``gens``.

    Pairs are selected by sugar degree, ties broken by the order on the lcm
    of the leading monomials; every basis element is kept monic.

    Raises:
        BudgetExceeded: more than ``budget`` S-pair reductions were needed.
    """
    gens = [g for g in gens if g]
    if not gens:
        return []
    R = gens[0].ring
    if not R.domain.is_Field:
        raise ValueError(f"Buchberger's algorithm needs a field, got {R.domain}")
    G, lmG, sugar = [], [], []
    P = set()
    for g in gens:
        g = monic(g, order)
        lm = leading_monomial(g, order)
        P = _update(G, lmG, P, g, lm, order)
        G.append(g)
        lmG.append(lm)
        sugar.append(_sugar(g))
    steps = 0

    def pair_key(p):
        i, j = p
        L = R.monomial_lcm(lmG[i], lmG[j])
        s = max(sugar[i] + sum(L) - sum(lmG[i]), sugar[j] + sum(L) - sum(lmG[j]))
        return (s, order(L), p)

    while P:
        if steps >= budget:
            raise BudgetExceeded(steps, budget, len(G))
        i, j = min(P, key=pair_key)
        P.remove((i, j))
        steps += 1
        s = spoly(G[i], G[j], lmG[i], lmG[j])
        r = normal_form(s, G, order)
        if r:
            r = monic(r, order)
            lm = leading_monomial(r, order)
            P = _update(G, lmG, P, r, lm, order)
            G.append(r)
            lmG.append(lm)
            sugar.append(pair_key((i, j))[0])
        if steps % 1000 == 0:
            logging.debug("buchberger: %d reductions, basis %d, pairs %d", steps, len(G), len(P))
    return _interreduce(_minimalize(G, order), order)


_basis_store = None


def set_basis_store(store):
    """Install (or with None remove) a persistent store for reduced bases.

    The store needs ``fetch(generators, order)`` returning a basis or None and
    ``save(generators, order, basis)``.
    """
    global _basis_store
    _basis_store = store


class Ideal:
    """A list of generators with reduced Groebner bases cached per order."""

    def __init__(self, generators, variables=None, ring=None):
        self.generators = tuple(g for g in generators if g)
        if self.generators:
            self.ring = self.generators[0].ring
            if any(g.ring != self.ring for g in self.generators):
                raise ValueError("all generators must share one ring")
        elif ring is not None:
            self.ring = ring
        elif variables is not None:
            self.ring = variables.ring()
        else:
            raise ValueError("the zero ideal needs its ring")
        self.variables = variables if isinstance(variables, VariableSet) else \
            VariableSet(tuple(str(s) for s in self.ring.symbols))
        self._bases = {}
        self._lock = threading.Lock()

    def __getstate__(self):
        state = self.__dict__.copy()
        del state['_lock']
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()

    def __repr__(self):
        return f"Ideal({len(self.generators)} generators in {self.ring.ngens} variables)"

    def groebner(self, order=GREVLEX, budget=DEFAULT_BUDGET):
        key = str(order)
        with self._lock:
            if key in self._bases:
                return self._bases[key]
        G = None
        if _basis_store is not None:
            G = _basis_store.fetch(self.generators, order)
        if G is None:
            G = buchberger(self.generators, order, budget)
            if _basis_store is not None:
                _basis_store.save(self.generators, order, G)
        with self._lock:
            return self._bases.setdefault(key, G)

    def reduce(self, f, order=GREVLEX, budget=DEFAULT_BUDGET):
        return normal_form(f, self.groebner(order, budget), order)

    def contains(self, f, order=GREVLEX, budget=DEFAULT_BUDGET):
        return ideal_member(f, self, order, budget)

    @property
    def is_unit(self):
        G = self.groebner()
        return len(G) == 1 and G[0].is_ground


def ideal_member(f, ideal, order=GREVLEX, budget=DEFAULT_BUDGET):
    if not f:
        return True
    if not ideal.generators:
        return False
    return not ideal.reduce(f, order, budget)


def eliminate(ideal, drop, budget=DEFAULT_BUDGET):
    """Generators of the intersection of ``ideal`` with the subring free of
    the variables in ``drop``; computed with the ``drop`` block dominant."""
    variables = ideal.variables
    drop = set(drop)
    unknown = drop - set(variables.names)
    if unknown:
        raise ValueError(f"cannot eliminate unknown variables {sorted(unknown)}")
    if not ideal.generators:
        return Ideal((), variables, ideal.ring)
    order = MonomialOrder.block(variables, drop)
    idx = [variables.index(n) for n in drop]
    G = ideal.groebner(order, budget)
    kept = [g for g in G if all(not any(m[i] for i in idx) for m in g.keys())]
    return Ideal(kept, variables, ideal.ring)


def saturate(ideal, f, budget=DEFAULT_BUDGET):
    """The saturation (I : f^oo), via an extra variable w and w*f - 1."""
    if not f:
        raise ValueError("cannot saturate by the zero polynomial")
    variables = ideal.variables
    w = 'w'
    while w in variables:
        w += '_'
    big = variables.extended([w], front=True)
    R = big.ring(ideal.ring.domain)
    gens = [to_ring(g, R) for g in ideal.generators]
    gens.append(R.gens[0] * to_ring(f, R) - R.one)
    J = eliminate(Ideal(gens, big), [w], budget)
    return Ideal([to_ring(g, ideal.ring) for g in J.generators], variables, ideal.ring)


def same_principal_ideal(f, g):
    """True when (f) = (g), i.e. f is a nonzero scalar multiple of g."""
    if not f or not g:
        return not f and not g
    return monic(f, GREVLEX) == monic(g, GREVLEX)


def staircase(basis, order=GREVLEX):
    """Number of standard monomials of a reduced basis, or None when the
    quotient is not finite dimensional."""
    if not basis:
        return None
    R = basis[0].ring
    n = R.ngens
    leads = [leading_monomial(g, order) for g in basis]
    if any(sum(m) == 0 for m in leads):
        return 0
    for i in range(n):
        if not any(m[i] and sum(m) == m[i] for m in leads):
            return None
    seen = {(0,) * n}
    frontier = [(0,) * n]
    while frontier:
        m = frontier.pop()
        for i in range(n):
            nxt = m[:i] + (m[i] + 1,) + m[i + 1:]
            if nxt in seen:
                continue
            if any(R.monomial_div(nxt, lm) is not None for lm in leads):
                continue
            seen.add(nxt)
            frontier.append(nxt)
    return len(seen)


def homogeneous_part(f, d):
    return f.ring.from_dict({m: c for m, c in f.items() if sum(m) == d})


def lowest_degree(f):
    return min((sum(m) for m in f.keys()), default=None)


def lowest_form(f):
    if not f:
        return f
    return homogeneous_part(f, lowest_degree(f))


def _point_value(value, domain):
    if isinstance(value, int):
        return domain(value)
    if isinstance(value, str):
        return domain.from_sympy(sympify(value))
    return value


def chart_translation(variables, chart, point, domain):
    """The chart coordinates and the map setting the chart variables to
    their values and moving ``point`` to the origin.

    Args:
        variables: full VariableSet of the ideal.
        chart: mapping name -> value for the dehomogenized variables.
        point: mapping name -> value for the other coordinates; missing
            coordinates are 0. Values are ints, domain elements or text
            in the parameters of ``domain``.
    """
    local = variables.without(chart)
    R = local.ring(domain)
    gens = dict(zip(local.names, R.gens))
    assignment = {}
    for name in variables.names:
        if name in chart:
            assignment[name] = R(_point_value(chart[name], domain))
        else:
            value = _point_value(point.get(name, 0), domain)
            assignment[name] = gens[name] + R(value)
    return local, substitution_map(variables, assignment, local, domain)


@dataclass
class LocalPresentation:
    """Equations of a chart neighbourhood of a point moved to the origin.

    Attributes:
        variables: chart coordinates (after dehomogenization).
        chart: dehomogenized variables and their values.
        point: the original point.
        equations: remaining equations after substitution elimination.
        trail: ``(name, expression)`` pairs, one per eliminated variable in
            elimination order; ``name - expression`` lies in the chart ideal.
        original: translated chart equations before elimination.
    """
    variables: VariableSet
    chart: dict
    point: dict
    equations: list
    domain: object = None
    trail: list = field(default_factory=list)
    original: list = field(default_factory=list)

    @property
    def eliminated(self):
        return [name for name, _ in self.trail]

    @property
    def remaining(self):
        gone = set(self.eliminated)
        return [n for n in self.variables.names if n not in gone]

    @property
    def ring(self):
        return self.variables.ring(self.domain)

    def relations(self):
        """The polynomials name - expression recorded by the trail."""
        gens = self.variables.gens(self.domain)
        return [gens[name] - expr for name, expr in self.trail]


def _solvable(f, names, gone):
    """A variable v and expression g with f = c*(v - g), c a nonzero
    constant and v absent from g."""
    R = f.ring
    for i, name in enumerate(names):
        if name in gone:
            continue
        unit = tuple(1 if k == i else 0 for k in range(R.ngens))
        c = f.get(unit)
        if not c:
            continue
        if any(m[i] for m in f.keys() if m != unit):
            continue
        g = -(f - R.term_new(unit, c)).quo_ground(c)
        return name, g
    return None


def local_eliminate(ideal, point, chart, domain=None):
    """Translate ``point`` of the chart to the origin and repeatedly solve
    equations of the form v - g with v absent from g."""
    domain = domain or ideal.ring.domain
    local, move = chart_translation(ideal.variables, chart, point, domain)
    eqs = [substitute(change_domain(g, domain) if g.ring.domain != domain else g, move)
           for g in ideal.generators]
    eqs = [g for g in eqs if g]
    bad = [i for i, g in enumerate(eqs) if g.get((0,) * len(local))]
    if bad:
        raise PointNotOnVariety(f"equation {bad[0] + 1} does not vanish at {point}")
    original = list(eqs)
    trail = []
    gone = set()
    while True:
        found = None
        for k, f in enumerate(eqs):
            found = _solvable(f, local.names, gone)
            if found:
                break
        if not found:
            break
        name, g = found
        trail.append((name, g))
        gone.add(name)
        sub = substitution_map(local, {name: g}, local, domain)
        eqs = [substitute(h, sub) for j, h in enumerate(eqs) if j != k]
        eqs = [h for h in eqs if h]
    logging.debug("local_eliminate at %s: eliminated %s, %d equations left",
                  point, [n for n, _ in trail], len(eqs))
    return LocalPresentation(local, dict(chart), dict(point), eqs, domain, trail, original)


def tangent_cone(ideal, point, chart, domain=None, budget=DEFAULT_BUDGET):
    """Ideal of lowest-degree forms at ``point`` (Lazard's homogenization).

    The translated chart equations are homogenized with an extra variable
    and a reduced basis is computed for the tangent order; the lowest forms of
    its dehomogenized elements generate the tangent cone.
    """
    domain = domain or ideal.ring.domain
    local, move = chart_translation(ideal.variables, chart, point, domain)
    eqs = [substitute(change_domain(g, domain) if g.ring.domain != domain else g, move)
           for g in ideal.generators]
    eqs = [g for g in eqs if g]
    if any(g.get((0,) * len(local)) for g in eqs):
        raise PointNotOnVariety(f"the ideal does not vanish at {point}")
    h = 'h'
    while h in local:
        h += '_'
    hom = local.extended([h])
    H = hom.ring(domain)
    hi = len(local)
    homogenized = []
    for g in eqs:
        d = max(sum(m) for m in g.keys())
        homogenized.append(H.from_dict({m + (d - sum(m),): c for m, c in g.items()}))
    G = buchberger(homogenized, MonomialOrder('tangent', h=hi), budget)
    R = local.ring(domain)
    forms = []
    for g in G:
        terms = {}
        for m, c in g.items():
            key = m[:hi]
            terms[key] = terms.get(key, domain.zero) + c
        dehom = R.from_dict({m: c for m, c in terms.items() if c})
        if dehom:
            forms.append(lowest_form(dehom))
    return Ideal(forms, local, R)


def quadratic_span(equations):
    """Degree-2 parts of equations without constant or linear terms.

    When no equation has terms of degree below 2, their degree-2 parts span
    the degree-2 part of the tangent cone ideal.
    """
    parts = []
    for f in equations:
        low = lowest_degree(f)
        if low is not None and low < 2:
            raise ValueError(f"equation {f} has terms of degree {low}")
        q = homogeneous_part(f, 2)
        if q:
            parts.append(q)
    return parts
