"""Exact coefficient domains, variable sets, polynomial text I/O and ring maps.

Polynomials are sympy ``PolyElement`` objects: sparse dicts from exponent
tuples to domain elements, with no stored zeros. Every polynomial belongs to
a ``PolyRing`` built from a :class:`VariableSet` and one of the closed set of
coefficient domains (``QQ``, ``GF(p)`` for odd p, and fraction fields over
``QQ`` for curve or base parameters).
"""
import operator
import re
from dataclasses import dataclass
from functools import lru_cache

from sympy import QQ, ZZ, GF, Symbol, isprime
from sympy.polys.orderings import grevlex
from sympy.polys.rings import PolyRing


class PolynomialSyntaxError(ValueError):
    """Raised when polynomial text does not follow the grammar."""

    def __init__(self, message, text, position):
        super().__init__(f"{message} at position {position}: {text!r}")
        self.position = position


class UnknownVariableError(ValueError):
    pass


class DomainMismatchError(ValueError):
    pass


class ReductionError(ValueError):
    """Raised when a rational coefficient cannot be reduced modulo p."""


def prime_field(p):
    """Finite field GF(p) for an odd prime p."""
    p = int(p)
    if p == 2:
        raise ValueError("characteristic 2 is not supported")
    if p < 2 or not isprime(p):
        raise ValueError(f"{p} is not a prime")
    return GF(p)


def parse_field(text):
    """Coefficient domains from the command line syntax ``Q`` or ``p:<prime>``.

    Returns a list of domains, one per prime for the finite-field form.
    """
    text = text.strip()
    if text in ('Q', 'QQ'):
        return [QQ]
    if text.startswith('p:'):
        try:
            primes = [int(p) for p in text[2:].split(',') if p]
        except ValueError:
            raise ValueError(f"malformed field specification {text!r}")
        if not primes:
            raise ValueError(f"no primes in field specification {text!r}")
        return [prime_field(p) for p in primes]
    raise ValueError(f"unknown field {text!r}, expected Q or p:<prime>[,<prime>...]")


def characteristic(domain):
    return int(domain.characteristic())


def parameter_field(*names):
    """Fraction field QQ(names) used for generic points of curves and bases."""
    return QQ.frac_field(*[Symbol(n) for n in names])


def convert_coefficient(c, source, target):
    """Map a coefficient between domains, reducing rationals modulo p."""
    if source == target:
        return c
    if target.is_FiniteField and (source.is_QQ or source.is_ZZ):
        p = characteristic(target)
        num, den = int(source.numer(c)), int(source.denom(c))
        if den % p == 0:
            raise ReductionError(f"denominator {den} is divisible by {p}")
        return target(num) / target(den)
    return target.convert(c, source)


def coefficient_text(c, domain):
    if domain.is_FiniteField:
        return str(int(domain.to_int(c)) % characteristic(domain))
    if domain.is_QQ or domain.is_ZZ:
        num, den = int(domain.numer(c)), int(domain.denom(c))
        return str(num) if den == 1 else f"{num}/{den}"
    num, den = domain.numer(c), domain.denom(c)
    if den == 1 and num.is_ground:
        return format_poly(num)
    text = f"({format_poly(num)})"
    return text if den == 1 else f"{text}/({format_poly(den)})"


def _negative(c, domain):
    if domain.is_FiniteField:
        return False
    if domain.is_QQ or domain.is_ZZ:
        return c < 0
    num, den = domain.numer(c), domain.denom(c)
    return den == 1 and num.is_ground and num.LC < 0


@dataclass(frozen=True)
class VariableSet:
    """Ordered variable names with tagged blocks.

    Attributes:
        names: distinct variable names, in ring order.
        blocks: pairs ``(tag, names)``; a tag names a projective block or the
            base coordinates, used for multidegree bookkeeping.
    """
    names: tuple
    blocks: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, 'names', tuple(self.names))
        object.__setattr__(self, 'blocks',
                           tuple((tag, tuple(vs)) for tag, vs in self.blocks))
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate variable names in {self.names}")
        for name in self.names:
            if not _NAME.fullmatch(name):
                raise ValueError(f"invalid variable name {name!r}")
        for tag, vs in self.blocks:
            if not vs:
                raise ValueError(f"block {tag!r} is empty")
            missing = [v for v in vs if v not in self.names]
            if missing:
                raise UnknownVariableError(f"block {tag!r} uses unknown variables {missing}")

    def __len__(self):
        return len(self.names)

    def __contains__(self, name):
        return name in self.names

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownVariableError(f"unknown variable {name!r}")

    def block(self, tag):
        for t, vs in self.blocks:
            if t == tag:
                return vs
        raise KeyError(f"no block tagged {tag!r}")

    @property
    def tags(self):
        return tuple(t for t, _ in self.blocks)

    def ring(self, domain=QQ):
        return _ring(self.names, domain)

    def gens(self, domain=QQ):
        return dict(zip(self.names, self.ring(domain).gens))

    def without(self, drop):
        drop = set(drop)
        return VariableSet(
            [n for n in self.names if n not in drop],
            [(t, [v for v in vs if v not in drop]) for t, vs in self.blocks
             if any(v not in drop for v in vs)])

    def extended(self, names, tag=None, front=False):
        names = [n for n in names if n not in self.names]
        blocks = self.blocks + ((tag, tuple(names)),) if tag and names else self.blocks
        merged = tuple(names) + self.names if front else self.names + tuple(names)
        return VariableSet(merged, blocks)


@lru_cache(maxsize=None)
def _ring(names, domain):
    return PolyRing([Symbol(n) for n in names], domain, grevlex)


def variable_names(f):
    return tuple(str(s) for s in f.ring.symbols)


def same_ring(f, g):
    if f.ring != g.ring:
        raise DomainMismatchError(
            f"polynomials live in different rings: {f.ring} and {g.ring}")


_ARITH = {'add': operator.add, 'sub': operator.sub, 'mul': operator.mul}


def arith(f, g, op):
    """Exact ``f op g`` for op in add, sub, mul on one ring."""
    same_ring(f, g)
    try:
        return _ARITH[op](f, g)
    except KeyError:
        raise ValueError(f"unknown operation {op!r}")


def to_ring(f, target):
    """Re-express f in ``target``, matching variables by name and converting
    coefficients (with modular reduction when the target is GF(p))."""
    if f.ring == target:
        return f
    src_names = variable_names(f)
    tgt_names = [str(s) for s in target.symbols]
    position = []
    for name in src_names:
        position.append(tgt_names.index(name) if name in tgt_names else None)
    terms = {}
    width = target.ngens
    for monom, coeff in f.items():
        exps = [0] * width
        for i, e in enumerate(monom):
            if not e:
                continue
            if position[i] is None:
                raise UnknownVariableError(f"variable {src_names[i]!r} is not in the target ring")
            exps[position[i]] = e
        c = convert_coefficient(coeff, f.ring.domain, target.domain)
        if c:
            key = tuple(exps)
            terms[key] = terms.get(key, target.domain.zero) + c
    return target.from_dict({m: c for m, c in terms.items() if c})


def change_domain(f, domain):
    return to_ring(f, _ring(variable_names(f), domain))


# grammar

_NAME = re.compile(r"[a-zA-Z][a-zA-Z0-9_']*")
_TOKEN = re.compile(r"\s*(?:(?P<int>\d+)|(?P<name>[a-zA-Z][a-zA-Z0-9_']*)|(?P<op>[-+*^()/])|(?P<bad>\S))")


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            break
        pos = m.end()
        kind = m.lastgroup
        if kind == 'bad':
            raise PolynomialSyntaxError(f"unexpected character {m.group(kind)!r}", text, m.start(kind))
        tokens.append((kind, m.group(kind), m.start(kind)))
    tokens.append(('end', '', len(text)))
    return tokens


class _Parser:
    """Recursive descent over the token list.

    expression ::= term (('+'|'-') term)*
    term       ::= factor ('*' factor)*
    factor     ::= '-' factor | integer | variable ['^' n] | '(' expression ')' ['^' n]

    Over a parameter field the parameter names read as constants.
    """

    def __init__(self, text, names, R):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.gens = dict(zip(names, R.gens))
        self.R = R
        self.params = {}
        if R.domain.is_FractionField:
            self.params = {str(s): R(R.domain.from_sympy(s)) for s in R.domain.symbols}

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise PolynomialSyntaxError(message, self.text, tok[2])

    def parse(self):
        if self.peek()[0] == 'end':
            self.fail("empty expression")
        value = self.expression()
        if self.peek()[0] != 'end':
            self.fail(f"unexpected {self.peek()[1]!r}")
        return value

    def expression(self):
        value = self.term()
        while self.peek()[1] in ('+', '-') and self.peek()[0] == 'op':
            sign = self.take()[1]
            rhs = self.term()
            value = value + rhs if sign == '+' else value - rhs
        return value

    def term(self):
        value = self.factor()
        while self.peek()[:2] == ('op', '*'):
            self.take()
            value = value * self.factor()
        return value

    def exponent(self):
        if self.peek()[:2] != ('op', '^'):
            return 1
        self.take()
        tok = self.take()
        if tok[0] != 'int' or int(tok[1]) < 1:
            self.fail("exponent must be a positive integer", tok)
        return int(tok[1])

    def factor(self):
        tok = self.take()
        kind, value, _ = tok
        if kind == 'op' and value == '-':
            return -self.factor()
        if kind == 'op' and value == '+':
            return self.factor()
        if kind == 'int':
            return self.R(int(value))
        if kind == 'name':
            if value not in self.gens and value in self.params:
                return self.params[value] ** self.exponent()
            if value not in self.gens:
                raise UnknownVariableError(f"unknown variable {value!r} at position {tok[2]}")
            return self.gens[value] ** self.exponent()
        if kind == 'op' and value == '(':
            inner = self.expression()
            if self.peek()[:2] != ('op', ')'):
                self.fail("expected ')'")
            self.take()
            return inner ** self.exponent()
        if kind == 'op' and value == '/':
            self.fail("division is not supported", tok)
        self.fail(f"unexpected {value!r}" if value else "unexpected end of input", tok)


def parse_poly(text, variables, domain=QQ):
    """Parse ``text`` into a polynomial of ``variables.ring(domain)``."""
    if isinstance(variables, VariableSet):
        names = variables.names
        R = variables.ring(domain)
    else:
        R = variables
        names = tuple(str(s) for s in R.symbols)
    return _Parser(text, names, R).parse()


def monomial_text(monom, names):
    parts = []
    for name, e in zip(names, monom):
        if e == 1:
            parts.append(name)
        elif e > 1:
            parts.append(f"{name}^{e}")
    return '*'.join(parts)


def format_poly(f):
    """Canonical text: terms by descending graded reverse lex, integer or
    residue coefficients, ``c*x0^2*x1`` style. Coefficients in a parameter
    field print as parenthesized polynomials in the parameters."""
    if not f:
        return '0'
    names = variable_names(f)
    domain = f.ring.domain
    pieces = []
    for monom, coeff in sorted(f.items(), key=lambda t: grevlex(t[0]), reverse=True):
        mono = monomial_text(monom, names)
        negative = _negative(coeff, domain)
        if negative:
            coeff = -coeff
        ctext = coefficient_text(coeff, domain)
        if not mono:
            body = ctext
        elif ctext == '1':
            body = mono
        else:
            body = f"{ctext}*{mono}"
        if not pieces:
            pieces.append(f"-{body}" if negative else body)
        else:
            pieces.append(f" - {body}" if negative else f" + {body}")
    return ''.join(pieces)


def multidegree(f, variables, tag):
    """Common degree of all terms in the block ``tag``, or None when f is not
    homogeneous in that block."""
    idx = [variables.index(n) for n in variables.block(tag)]
    degrees = {sum(monom[i] for i in idx) for monom in _monoms_in(f, variables)}
    if not degrees:
        return 0
    if len(degrees) > 1:
        return None
    return degrees.pop()


def _monoms_in(f, variables):
    names = variable_names(f)
    if names == variables.names:
        return list(f.keys())
    position = [variables.index(n) for n in names]
    monoms = []
    for monom in f.keys():
        exps = [0] * len(variables)
        for i, e in zip(position, monom):
            exps[i] = e
        monoms.append(tuple(exps))
    return monoms


def total_degree(f):
    return max((sum(m) for m in f.keys()), default=-1)


def evaluate(f, values):
    """Value of f at a point given as a mapping name -> domain element."""
    domain = f.ring.domain
    point = [values[n] for n in variable_names(f)]
    total = domain.zero
    for monom, coeff in f.items():
        term = coeff
        for v, e in zip(point, monom):
            if e:
                term *= v ** e
        total += term
    return total


def jacobian(equations, names):
    """Matrix of partial derivatives, rows per equation, columns per name."""
    if not equations:
        return []
    gens = dict(zip(variable_names(equations[0]), equations[0].ring.gens))
    return [[f.diff(gens[n]) for n in names] for f in equations]


@dataclass(frozen=True)
class PolyMap:
    """Ring homomorphism given by the image of each source variable.

    Attributes:
        source: variables the map is defined on.
        target: variables of the images.
        images: one polynomial of the target ring per source variable.
    """
    source: VariableSet
    target: VariableSet
    images: tuple

    def __post_init__(self):
        object.__setattr__(self, 'images', tuple(self.images))
        if len(self.images) != len(self.source):
            raise ValueError(
                f"map needs {len(self.source)} images, got {len(self.images)}")

    @property
    def ring(self):
        return self.images[0].ring if self.images else self.target.ring()

    @classmethod
    def from_text(cls, source, target, texts, domain=QQ):
        if isinstance(texts, dict):
            texts = [texts.get(n, n) for n in source.names]
        return cls(source, target, [parse_poly(t, target, domain) for t in texts])

    @classmethod
    def identity(cls, variables, domain=QQ):
        return cls(variables, variables, variables.ring(domain).gens)

    def image(self, name):
        return self.images[self.source.index(name)]

    def __call__(self, f):
        return substitute(f, self)

    def then(self, other):
        """The composite ``other o self``: apply self first, then other."""
        return PolyMap(self.source, other.target, [substitute(g, other) for g in self.images])

    def over(self, domain):
        return PolyMap(self.source, self.target, [change_domain(g, domain) for g in self.images])

    def swapped(self, i, j):
        images = list(self.images)
        images[i], images[j] = images[j], images[i]
        return PolyMap(self.source, self.target, images)


def substitute(f, m):
    """Image of f under the homomorphism m."""
    names = variable_names(f)
    images = []
    for name in names:
        if name not in m.source:
            raise UnknownVariableError(f"variable {name!r} is missing from the map")
        images.append(m.image(name))
    R = m.ring
    domain = R.domain
    result = R.zero
    powers = [{1: g} for g in images]
    for monom, coeff in f.items():
        term = R(convert_coefficient(coeff, f.ring.domain, domain))
        for i, e in enumerate(monom):
            if not e:
                continue
            cache = powers[i]
            if e not in cache:
                cache[e] = images[i] ** e
            term = term * cache[e]
        result += term
    return result


def substitution_map(variables, assignment, target=None, domain=QQ):
    """PolyMap sending each name in ``assignment`` (name -> polynomial or
    text) to its value and every other variable to itself."""
    target = target or variables
    R = target.ring(domain)
    gens = dict(zip(target.names, R.gens))
    images = []
    for name in variables.names:
        value = assignment.get(name)
        if value is None:
            images.append(gens[name])
        elif isinstance(value, str):
            images.append(parse_poly(value, target, domain))
        elif isinstance(value, int):
            images.append(R(value))
        else:
            images.append(to_ring(value, R) if hasattr(value, 'ring') else R(value))
    return PolyMap(variables, target, images)


def count_expression(text):
    """Integer-valued function of p from a count expression such as ``(p+1)^2``."""
    f = parse_poly(text, VariableSet(('p',)), ZZ)

    def count(p):
        return int(sum(int(c) * p ** m[0] for m, c in f.items()))
    count.text = text
    return count


