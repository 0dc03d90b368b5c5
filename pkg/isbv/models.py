"""Registry of local models of involution surface bundles.

Every model lives in a JSON model file; the seven built-in ones ship in
``isbv/data`` and go through the same :func:`load_model` validation as user
files, so a transcription error in a table row aborts loading with the row
number.
"""
import copy
import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from importlib import resources
from pathlib import Path

from sympy import QQ

from isbv.algebra import (PolyMap, VariableSet, format_poly, multidegree,
                          parse_poly, substitute)
from isbv.groebner import Ideal

BUILTIN = ('i-ii', 'ii-ii', 'iii-ii', 'iv-ii', 'iv-iv-meet', 'iv-iv-disjoint', 'segre-d2')

SINGULARITY_KINDS = ('A1-transverse', 'D-infinity', 'toric-chart-identity', 'smooth-total-space')

_ADMISSIBLE_PAIRS = {('I', 'II'), ('II', 'II'), ('II', 'III'), ('II', 'IV'), ('IV', 'IV')}


class ModelError(ValueError):
    """Invalid model file; ``row`` is the 1-based equation index if any."""

    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"{message} (row {row})")
        self.row = row


class DegenerationType(Enum):
    I = 'a quadric surface with an A1-singularity'
    II = 'the self-product of a reduced singular conic'
    III = ('a union of two copies of the Hirzebruch surface F2, each with '
           '(-2)-curve glued to a fiber of the other')
    IV = 'the product with P1 of a reduced singular conic'

    @property
    def description(self):
        return self.value


@dataclass
class FreenessClaim:
    """The coordinate ring is free over ``subring`` with the given basis.

    Attributes:
        subring: names of the subring generators; names in ``defined_vars``
            stand for linear combinations of model coordinates.
        defined_vars: name -> polynomial text in the model coordinates.
        basis: monomials (text) in the model coordinates.
    """
    subring: list
    basis: list
    defined_vars: dict = field(default_factory=dict)

    @property
    def expected_rank(self):
        return len(self.basis)


@dataclass
class SingularityClaim:
    """One statement about the singular locus.

    Attributes:
        kind: one of ``SINGULARITY_KINDS``.
        label: short free-form name used in reports.
        chart: coordinates set to fixed values (dehomogenization).
        point: the point studied, in the remaining coordinates; values may
            involve ``params``. Missing coordinates are 0.
        params: names of parameters of a generic point of the locus.
        locus: polynomials (text) in the model coordinates cutting out the
            claimed singular set; finite field scans test membership with it.
        expected_rank: quadratic rank of the tangent cone where it applies.
        equation: the local chart equation for toric chart identities.
        line: a generic point of the singular line of a D-infinity claim.
    """
    kind: str
    label: str = ''
    chart: dict = field(default_factory=dict)
    point: dict = field(default_factory=dict)
    params: list = field(default_factory=list)
    locus: list = field(default_factory=list)
    expected_rank: int = None
    equation: str = None
    line: dict = None


@dataclass
class FiberClaim:
    """Hilbert values h(1), h(2), ... and a point count formula in p.

    ``components`` are candidate component ideals (lists of polynomial text)
    of the fiber; each must contain the fiber ideal.
    """
    point: dict
    hilbert: list = field(default_factory=list)
    counts: str = None
    components: list = field(default_factory=list)


@dataclass
class MapSpec:
    name: str
    source: list
    target: list
    images: list

    @cached_property
    def polymap(self):
        return PolyMap.from_text(VariableSet(self.source), VariableSet(self.target), self.images)


@dataclass
class IdentityClaim:
    """The composite of ``chain`` equals ``scale`` times ``rhs`` componentwise.

    ``pullbacks`` are polynomials in the source of the last map of the chain
    that must pull back to zero along it.
    """
    name: str
    chain: list
    rhs: list
    scale: str = '1'
    pullbacks: list = field(default_factory=list)


@dataclass
class Claims:
    freeness: FreenessClaim = None
    singularities: list = field(default_factory=list)
    fibers: list = field(default_factory=list)
    identities: list = field(default_factory=list)

    def summary(self):
        parts = []
        if self.freeness:
            parts.append(f"freeness(rank {self.freeness.expected_rank})")
        if self.singularities:
            parts.append('singular(' + ', '.join(c.kind for c in self.singularities) + ')')
        if self.fibers:
            parts.append(f"fibers({len(self.fibers)})")
        if self.identities:
            parts.append(f"identities({len(self.identities)})")
        return ' '.join(parts) or 'structural only'


@dataclass
class LocalModel:
    """A local model: equations over an affine base times projective blocks.

    Text fields are kept exactly as transcribed; parsed polynomials are
    derived on first use.
    """
    name: str
    equations: list
    base_vars: list = field(default_factory=list)
    blocks: list = field(default_factory=list)
    description: str = ''
    types: dict = field(default_factory=dict)
    divisors: dict = field(default_factory=dict)
    descent: dict = field(default_factory=dict)
    section_vars: list = field(default_factory=list)
    sections: list = None
    coefficient_monomials: list = field(default_factory=list)
    smooth_rank: int = None
    fiber_formula: dict = None
    claims: Claims = field(default_factory=Claims)
    mutations: list = field(default_factory=list)

    @property
    def tags(self):
        return [f"P{i}" for i in range(len(self.blocks))]

    @property
    def fiber_vars(self):
        return [n for b in self.blocks for n in b]

    @cached_property
    def variables(self):
        blocks = [('base', self.base_vars)] if self.base_vars else []
        blocks += list(zip(self.tags, self.blocks))
        return VariableSet(list(self.base_vars) + self.fiber_vars, blocks)

    @cached_property
    def polynomials(self):
        return [parse_poly(e, self.variables) for e in self.equations]

    @property
    def ideal(self):
        return Ideal(self.polynomials, self.variables)

    @cached_property
    def parameter_variables(self):
        blocks = [('base', self.base_vars)] if self.base_vars else []
        blocks += [(f"S{i}", b) for i, b in enumerate(self.section_vars)]
        return VariableSet(list(self.base_vars) + [n for b in self.section_vars for n in b], blocks)

    @cached_property
    def section_map(self):
        """PolyMap from the model coordinates to the parametrization; base
        coordinates map to themselves."""
        if self.sections is None:
            return None
        target = self.parameter_variables
        images = list(self.base_vars) + list(self.sections)
        return PolyMap.from_text(self.variables, target, images)

    @property
    def codim(self):
        return self.smooth_rank

    def descended(self):
        """The same model over the coordinates named by ``descent``.

        Each descent entry sends a new base coordinate to a power of an old
        one (``x = s^2``); every exponent of that old coordinate must be a
        multiple of the power. Sections are dropped.
        """
        if not self.descent:
            return self
        old = VariableSet(self.base_vars)
        powers = {}
        for new, text in self.descent.items():
            f = parse_poly(text, old)
            if len(f) != 1 or f.LC != QQ.one or sum(1 for e in f.LM if e) != 1:
                raise ModelError(f"descent {new} = {text} is not a power of one coordinate")
            i = next(k for k, e in enumerate(f.LM) if e)
            powers[self.base_vars[i]] = (new, f.LM[i])
        missing = [b for b in self.base_vars if b not in powers]
        if missing:
            raise ModelError(f"descent does not cover base coordinates {missing}")
        new_base = list(self.descent)
        target = VariableSet(new_base + self.fiber_vars)
        R = target.ring()
        nb = len(self.base_vars)
        order = [new_base.index(powers[b][0]) for b in self.base_vars]
        equations = []
        for row, f in enumerate(self.polynomials, 1):
            terms = {}
            for m, c in f.items():
                exps = [0] * len(new_base)
                for k, b in enumerate(self.base_vars):
                    q, rem = divmod(m[k], powers[b][1])
                    if rem:
                        raise ModelError(f"exponent {m[k]} of {b} does not descend", row)
                    exps[order[k]] = q
                terms[tuple(exps) + m[nb:]] = c
            equations.append(format_poly(R.from_dict(terms)))
        divisors = {d: powers[c][0] if c in powers else c for d, c in self.divisors.items()}
        return replace(self, base_vars=new_base, equations=equations, descent={},
                       sections=None, section_vars=[], divisors=divisors,
                       coefficient_monomials=[])

    def validate(self):
        """Raise ModelError unless the model satisfies the registry invariants."""
        if not self.name:
            raise ModelError("model without a name")
        try:
            variables = self.variables
        except ValueError as e:
            raise ModelError(f"{self.name}: {e}")
        for d, t in self.types.items():
            if t not in DegenerationType.__members__:
                raise ModelError(f"{self.name}: unknown degeneration type {t!r} over {d}")
        if self.types:
            pair = tuple(sorted(self.types.values()))
            if pair not in _ADMISSIBLE_PAIRS:
                raise ModelError(f"{self.name}: types {pair} do not meet in a local model")
        coords = list(self.divisors.values())
        if len(set(coords)) != len(coords):
            raise ModelError(f"{self.name}: divisors share a coordinate")
        base = set(self.base_vars) | set(self.descent)
        for d, c in self.divisors.items():
            if c not in base:
                raise ModelError(f"{self.name}: divisor {d} uses {c!r}, not a base coordinate")
        polys = []
        for row, text in enumerate(self.equations, 1):
            try:
                f = parse_poly(text, variables)
            except ValueError as e:
                raise ModelError(f"{self.name}: {e}", row)
            for tag in self.tags:
                if multidegree(f, variables, tag) is None:
                    raise ModelError(f"{self.name}: equation is not homogeneous in block {tag}", row)
            polys.append(f)
        self.__dict__['polynomials'] = polys
        if self.sections is not None:
            self._validate_sections()
        if self.descent:
            self.descended()
        if self.claims.freeness:
            claim = self.claims.freeness
            if len(claim.subring) != len(set(claim.subring)):
                raise ModelError(f"{self.name}: repeated subring variable")
        for claim in self.claims.singularities:
            if claim.kind not in SINGULARITY_KINDS:
                raise ModelError(f"{self.name}: unknown singularity kind {claim.kind!r}")
            if claim.kind in ('A1-transverse', 'D-infinity') and claim.expected_rank is None:
                raise ModelError(f"{self.name}: {claim.kind} claim needs expected_rank")
            if claim.kind == 'toric-chart-identity' and not claim.equation:
                raise ModelError(f"{self.name}: toric chart claim needs an equation")
        for fiber in self.claims.fibers:
            if any(not isinstance(h, int) for h in fiber.hilbert):
                raise ModelError(f"{self.name}: Hilbert values must be integers")
            for gens in fiber.components:
                try:
                    [parse_poly(t, self.variables) for t in gens]
                except ValueError as e:
                    raise ModelError(f"{self.name}: fiber component {gens}: {e}")
        return self

    def _validate_sections(self):
        if len(self.sections) != len(self.fiber_vars):
            raise ModelError(f"{self.name}: {len(self.sections)} sections for "
                             f"{len(self.fiber_vars)} coordinates")
        try:
            m = self.section_map
        except ValueError as e:
            raise ModelError(f"{self.name}: section {e}")
        target = self.parameter_variables
        degrees = set()
        for g in m.images[len(self.base_vars):]:
            degrees.add(tuple(multidegree(g, target, f"S{i}") for i in range(len(self.section_vars))))
        if len(degrees) > 1 or any(d is None for ds in degrees for d in ds):
            raise ModelError(f"{self.name}: sections do not share one multidegree")
        for row, f in enumerate(self.polynomials, 1):
            if substitute(f, m):
                raise ModelError(f"{self.name}: equation does not vanish on the sections", row)

    def summary(self):
        return {
            'name': self.name,
            'equations': len(self.equations),
            'sections': len(self.sections) if self.sections is not None else 0,
            'types': '-'.join(self.types.values()),
            'claims': self.claims.summary(),
        }


def _claims_from_dict(d):
    d = d or {}
    freeness = d.get('freeness')
    if freeness is not None:
        freeness = FreenessClaim(list(freeness['subring']), list(freeness['basis']),
                                 dict(freeness.get('defined_vars', {})))
    identities = []
    for ident in d.get('identities', []):
        chain = [MapSpec(c['name'], list(c['source']), list(c['target']), list(c['images']))
                 for c in ident['chain']]
        identities.append(IdentityClaim(ident['name'], chain, list(ident['rhs']),
                                        ident.get('scale', '1'), list(ident.get('pullbacks', []))))
    return Claims(
        freeness=freeness,
        singularities=[SingularityClaim(**s) for s in d.get('singularities', [])],
        fibers=[FiberClaim(**f) for f in d.get('fibers', [])],
        identities=identities,
    )


_REQUIRED = ('name', 'equations')
_KNOWN = {'name', 'description', 'types', 'base_vars', 'divisors', 'descent', 'blocks',
          'section_vars', 'sections', 'coefficient_monomials', 'smooth_rank',
          'equations', 'fiber_formula', 'claims', 'mutations'}


def model_from_dict(d):
    if not isinstance(d, dict):
        raise ModelError("a model file must hold one JSON object")
    missing = [k for k in _REQUIRED if k not in d]
    if missing:
        raise ModelError(f"model file lacks fields {missing}")
    unknown = sorted(set(d) - _KNOWN)
    if unknown:
        raise ModelError(f"model file has unknown fields {unknown}")
    try:
        return LocalModel(
            name=d['name'],
            description=d.get('description', ''),
            types=dict(d.get('types', {})),
            base_vars=list(d.get('base_vars', [])),
            divisors=dict(d.get('divisors', {})),
            descent=dict(d.get('descent', {})),
            blocks=[list(b) for b in d.get('blocks', [])],
            section_vars=[list(b) for b in d.get('section_vars', [])],
            sections=list(d['sections']) if d.get('sections') is not None else None,
            coefficient_monomials=list(d.get('coefficient_monomials', [])),
            smooth_rank=d.get('smooth_rank'),
            equations=list(d['equations']),
            fiber_formula=d.get('fiber_formula'),
            claims=_claims_from_dict(d.get('claims')),
            mutations=list(d.get('mutations', [])),
        )
    except (KeyError, TypeError) as e:
        raise ModelError(f"malformed model file: {e}")


def load_model(document):
    """Validated LocalModel from a path, JSON text or a parsed dict."""
    if isinstance(document, dict):
        d = document
    else:
        text = Path(document).read_text(encoding='utf-8') \
            if isinstance(document, Path) or not str(document).lstrip().startswith('{') \
            else document
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ModelError(f"not a JSON model file: {e}")
    model = model_from_dict(d).validate()
    logging.debug("loaded model %s with %d equations", model.name, len(model.equations))
    return model


def _drop_empty(d):
    return {k: v for k, v in d.items() if v not in (None, [], {}, '')}


def model_to_dict(model):
    claims = model.claims
    c = {}
    if claims.freeness:
        c['freeness'] = _drop_empty({'subring': claims.freeness.subring,
                                     'defined_vars': claims.freeness.defined_vars,
                                     'basis': claims.freeness.basis})
    if claims.singularities:
        c['singularities'] = [_drop_empty(vars(s)) for s in claims.singularities]
    if claims.fibers:
        c['fibers'] = [_drop_empty(vars(f)) for f in claims.fibers]
    if claims.identities:
        c['identities'] = [{
            'name': i.name,
            'chain': [{'name': m.name, 'source': m.source, 'target': m.target, 'images': m.images}
                      for m in i.chain],
            'rhs': i.rhs, 'scale': i.scale, 'pullbacks': i.pullbacks,
        } for i in claims.identities]
    d = {
        'name': model.name, 'description': model.description, 'types': model.types,
        'base_vars': model.base_vars, 'divisors': model.divisors, 'descent': model.descent,
        'blocks': model.blocks, 'section_vars': model.section_vars, 'sections': model.sections,
        'coefficient_monomials': model.coefficient_monomials, 'smooth_rank': model.smooth_rank,
        'equations': model.equations, 'fiber_formula': model.fiber_formula, 'claims': c,
        'mutations': model.mutations,
    }
    return dict(_drop_empty(d), equations=model.equations)


def dump_model(model):
    """Model file text (line-diffable JSON)."""
    return json.dumps(model_to_dict(model), indent=2, ensure_ascii=False) + '\n'


def builtin_models():
    """The shipped models in registry order, keyed by name."""
    registry = {}
    data = resources.files('isbv') / 'data'
    for name in BUILTIN:
        registry[name] = load_model((data / f"{name}.json").read_text(encoding='utf-8'))
    return registry


def apply_mutation(model, spec):
    """A mutated copy of ``model`` for exercising failure paths.

    ``drop-row:i`` (1-based), ``swap-sections:i,j`` (0-based),
    ``basis:i=mono``, ``subring:i=name`` and ``scale:i=mono`` (0-based).
    The result is not revalidated.
    """
    kind, _, arg = spec.partition(':')
    m = model_from_dict(copy.deepcopy(model_to_dict(model)))
    try:
        if kind == 'drop-row':
            i = int(arg)
            if not 1 <= i <= len(m.equations):
                raise ValueError(f"row {i} out of range")
            m.equations = m.equations[:i - 1] + m.equations[i:]
        elif kind == 'swap-sections':
            i, j = (int(x) for x in arg.split(','))
            if m.sections is None:
                raise ValueError(f"{m.name} has no sections")
            m.sections[i], m.sections[j] = m.sections[j], m.sections[i]
        elif kind in ('basis', 'subring'):
            i, value = arg.split('=')
            if m.claims.freeness is None:
                raise ValueError(f"{m.name} has no freeness claim")
            getattr(m.claims.freeness, kind)[int(i)] = value.strip()
        elif kind == 'scale':
            i, value = arg.split('=')
            m.claims.identities[int(i)].scale = value.strip()
        else:
            raise ValueError(f"unknown mutation {kind!r}")
    except (IndexError, ValueError) as e:
        raise ValueError(f"bad mutation {spec!r}: {e}")
    m.mutations = m.mutations + [spec]
    logging.info("mutated %s with %s", model.name, spec)
    return m
