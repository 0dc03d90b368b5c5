"""Exact rank and nullspace, graded piece dimensions and quadratic form rank.

Matrices over QQ and fraction fields go through sympy's ``DomainMatrix``;
matrices over GF(p) are row reduced with numpy, which is what the finite
field scans call many times over.
"""
import logging
from dataclasses import dataclass, field
from itertools import combinations_with_replacement, product

import numpy as np
from sympy import QQ, Symbol
from sympy.polys.matrices import DomainMatrix

from isbv.algebra import (VariableSet, characteristic,
                          convert_coefficient, multidegree, substitute,
                          substitution_map, variable_names)


class NotHomogeneousError(ValueError):
    pass


@dataclass
class ExactMatrix:
    """Dense row-major matrix over one coefficient domain.

    Attributes:
        rows: list of rows, each a list of domain elements.
        domain: sympy domain of the entries.
        row_labels: optional labels (monomials or tags) for the rows.
        col_labels: optional labels for the columns.
    """
    rows: list
    domain: object = QQ
    row_labels: list = field(default_factory=list)
    col_labels: list = field(default_factory=list)

    def __post_init__(self):
        widths = {len(r) for r in self.rows}
        if len(widths) > 1:
            raise ValueError(f"ragged matrix with row widths {sorted(widths)}")
        if not self.col_labels and widths:
            self.col_labels = list(range(widths.pop()))

    @property
    def shape(self):
        return len(self.rows), len(self.col_labels)

    def transpose(self):
        cols = [list(c) for c in zip(*self.rows)] if self.rows else []
        return ExactMatrix(cols, self.domain, list(self.col_labels), list(self.row_labels))

    def domain_matrix(self):
        """Sparse DomainMatrix; the relation matrices are mostly zeros."""
        entries = {}
        for i, row in enumerate(self.rows):
            nz = {j: c for j, c in enumerate(row) if c}
            if nz:
                entries[i] = nz
        return DomainMatrix(entries, self.shape, self.domain)

    def to_numpy(self):
        p = characteristic(self.domain)
        return np.array([[int(self.domain.to_int(c)) % p for c in r] for r in self.rows],
                        dtype=np.int64).reshape(self.shape)


def _entries(dm):
    if hasattr(dm, 'to_list'):
        return dm.to_list()
    return [list(row) for row in dm.rep.to_ddm()]


def rank_mod_p(A, p):
    """Rank of an integer array modulo p by row reduction."""
    A = np.array(A, dtype=np.int64) % p
    if A.ndim != 2 or A.size == 0:
        return 0
    nrows, ncols = A.shape
    r = 0
    for c in range(ncols):
        if r == nrows:
            break
        nz = np.nonzero(A[r:, c])[0]
        if nz.size == 0:
            continue
        piv = r + nz[0]
        if piv != r:
            A[[r, piv]] = A[[piv, r]]
        A[r] = A[r] * pow(int(A[r, c]), -1, p) % p
        others = np.nonzero(A[:, c])[0]
        others = others[others != r]
        if others.size:
            A[others] = (A[others] - np.outer(A[others, c], A[r])) % p
        r += 1
    return r


def rank(M):
    """Rank of an ExactMatrix over its entry domain."""
    nrows, ncols = M.shape
    if nrows == 0 or ncols == 0:
        return 0
    if M.domain.is_FiniteField:
        return rank_mod_p(M.to_numpy(), characteristic(M.domain))
    dm = M.domain_matrix()
    if not M.domain.is_Field:
        dm = dm.to_field()
    return int(dm.rank())


def nullspace(M):
    """Basis of the right kernel as a list of vectors over the entry domain."""
    nrows, ncols = M.shape
    domain = M.domain if M.domain.is_Field else M.domain.get_field()
    if ncols == 0:
        return []
    if nrows == 0:
        return [[domain.one if i == j else domain.zero for i in range(ncols)]
                for j in range(ncols)]
    dm = M.domain_matrix()
    if not M.domain.is_Field:
        dm = dm.to_field()
    rref, pivots = dm.rref()
    rows = _entries(rref)
    basis = []
    for free in (c for c in range(ncols) if c not in pivots):
        v = [domain.zero] * ncols
        v[free] = domain.one
        for i, pc in enumerate(pivots):
            v[pc] = -rows[i][free]
        basis.append(v)
    return basis


def monomials_of_degree(n, d):
    """Exponent tuples of degree d in n variables, in a fixed order."""
    out = []
    for combo in combinations_with_replacement(range(n), d):
        e = [0] * n
        for i in combo:
            e[i] += 1
        out.append(tuple(e))
    return out


def block_monomials(sizes, degrees):
    """Exponent tuples of the given degree in each of several blocks."""
    parts = [monomials_of_degree(n, d) for n, d in zip(sizes, degrees)]
    return [sum(combo, ()) for combo in product(*parts)]


def coefficient_matrix(polys, monomials=None):
    """Rows of coefficients of ``polys`` against a list of monomials.

    Without ``monomials`` the union of supports is used, sorted.
    """
    if not polys:
        return ExactMatrix([], QQ, [], list(monomials or []))
    domain = polys[0].ring.domain
    if monomials is None:
        monomials = sorted({m for f in polys for m in f.keys()}, reverse=True)
    index = {m: i for i, m in enumerate(monomials)}
    rows = []
    for f in polys:
        row = [domain.zero] * len(monomials)
        for m, c in f.items():
            if m not in index:
                raise ValueError(f"monomial {m} is outside the given monomial list")
            row[index[m]] = c
        rows.append(row)
    return ExactMatrix(rows, domain, list(range(len(polys))), list(monomials))


def base_field(names):
    """QQ(names), or QQ itself when there are no base coordinates."""
    if not names:
        return QQ
    return QQ.frac_field(*[Symbol(n) for n in names])


def base_element(K, coeffs):
    """Element of K from a dict of base exponents to rational coefficients."""
    if K == QQ:
        return sum(coeffs.values(), QQ.zero)
    return K.new(K.field.ring.from_dict(dict(coeffs)))


def _split_terms(f, base_idx, fiber_idx):
    """Map fiber exponent -> {base exponent: coefficient}."""
    out = {}
    for m, c in f.items():
        fm = tuple(m[i] for i in fiber_idx)
        bm = tuple(m[i] for i in base_idx)
        out.setdefault(fm, {})[bm] = c
    return out


def _fiber_rows(generators, variables, blocks, degrees):
    """Products of generators with complementary monomials, as dicts on
    fiber exponents with coefficient dicts on base exponents."""
    fiber_names = [n for b in blocks for n in variables.block(b)]
    fiber_idx = [variables.index(n) for n in fiber_names]
    base_idx = [i for i in range(len(variables)) if i not in fiber_idx]
    sizes = [len(variables.block(b)) for b in blocks]
    rows = []
    for g in generators:
        gdeg = []
        for b in blocks:
            d = multidegree(g, variables, b)
            if d is None:
                raise NotHomogeneousError(
                    f"generator is not homogeneous in block {b!r}")
            gdeg.append(d)
        comp = [d - e for d, e in zip(degrees, gdeg)]
        if any(c < 0 for c in comp):
            continue
        split = _split_terms(g, base_idx, fiber_idx)
        for mono in block_monomials(sizes, comp):
            rows.append({tuple(a + b for a, b in zip(fm, mono)): coeffs
                         for fm, coeffs in split.items()})
    return rows, block_monomials(sizes, degrees), base_idx


def graded_piece_dim(generators, variables, blocks, degree, specialization=None):
    """Dimension of the (multi)degree ``degree`` piece of the fiber ring.

    Args:
        generators: polynomials over QQ in ``variables``, homogeneous in every
            listed block.
        variables: VariableSet whose non-block variables are base coordinates.
        blocks: tags of the projective blocks.
        degree: an int (same degree in each block) or a tuple per block.
        specialization: ``None`` or ``"generic"`` for the generic fiber
            (coefficients in the fraction field of the base), or a mapping
            base name -> value, with an optional ``"domain"`` entry giving
            the coefficient domain of the values (default QQ).

    Returns:
        The value h(degree) of the fiber Hilbert function.
    """
    degrees = tuple(degree) if isinstance(degree, (tuple, list)) else (degree,) * len(blocks)
    rows, monos, base_idx = _fiber_rows(generators, variables, blocks, degrees)
    index = {m: i for i, m in enumerate(monos)}
    base_names = [variables.names[i] for i in base_idx]
    if specialization in (None, 'generic'):
        K = base_field(base_names)
        matrix = []
        for row in rows:
            vec = [K.zero] * len(monos)
            for fm, coeffs in row.items():
                vec[index[fm]] = base_element(K, coeffs)
            matrix.append(vec)
        r = rank(ExactMatrix(matrix, K)) if matrix else 0
        return len(monos) - r
    spec = dict(specialization)
    domain = spec.pop('domain', QQ)
    values = [spec[n] for n in base_names]
    values = [domain(v) if isinstance(v, int) else v for v in values]
    matrix = []
    for row in rows:
        vec = [domain.zero] * len(monos)
        for fm, coeffs in row.items():
            total = domain.zero
            for bm, c in coeffs.items():
                term = convert_coefficient(c, QQ, domain)
                for v, e in zip(values, bm):
                    if e:
                        term *= v ** e
                total += term
            vec[index[fm]] = total
        matrix.append(vec)
    r = rank(ExactMatrix(matrix, domain, col_labels=list(range(len(monos))))) if matrix else 0
    logging.debug("graded piece %s at %s: %d monomials, rank %d", degrees, specialization, len(monos), r)
    return len(monos) - r


def base_monomial_factor(f, base_names):
    """Exponents of a common base monomial m with f = m * (f restricted to
    fiber terms), or None when the base part is not a single monomial."""
    names = variable_names(f)
    idx = [names.index(n) for n in base_names if n in names]
    parts = {tuple(m[i] for i in idx) for m in f.keys()}
    if len(parts) != 1:
        return None
    return dict(zip([n for n in base_names if n in names], parts.pop()))


def image_rank(section_map, degree, coords, base_names):
    """Generic rank of the degree ``degree`` part of a parametrization.

    The columns are the degree-d monomials in ``coords`` substituted through
    ``section_map``. When every section is a base monomial times a fiber
    polynomial, the generic matrix is the integer matrix at base = 1 with
    columns scaled by nonzero monomials, so their ranks agree.

    Returns:
        ``(rank, certificate)`` with certificate ``"column-scaling"`` or
        ``"fraction-field"``.
    """
    images = [section_map.image(c) for c in coords]
    monos = monomials_of_degree(len(coords), degree)
    scalable = all(base_monomial_factor(g, base_names) is not None for g in images if g)
    target = section_map.target
    if scalable:
        ones = substitution_map(target, {b: 1 for b in base_names if b in target}, target)
        images = [substitute(g, ones) for g in images]
    columns = []
    for mono in monos:
        col = images[0].ring.one
        for g, e in zip(images, mono):
            if e:
                col = col * g ** e
        columns.append(col)
    if scalable:
        return rank(coefficient_matrix(columns).transpose()), 'column-scaling'
    fiber = [n for n in target.names if n not in base_names]
    local = VariableSet(target.names, [('fiber', fiber)] if fiber else [])
    rows = []
    base_idx = [local.index(n) for n in base_names if n in local]
    fiber_idx = [local.index(n) for n in fiber]
    K = base_field([local.names[i] for i in base_idx])
    split_cols = [_split_terms(c, base_idx, fiber_idx) for c in columns]
    fiber_monos = sorted({fm for s in split_cols for fm in s})
    for fm in fiber_monos:
        rows.append([base_element(K, s.get(fm, {})) for s in split_cols])
    return rank(ExactMatrix(rows, K)), 'fraction-field'


@dataclass
class QuadraticForm:
    """Symmetric Gram matrix of the degree-2 part of a polynomial.

    The (i, j) entry is half the coefficient of x_i x_j for i != j.
    """
    gram: list
    names: list
    domain: object
    polynomial: object = None

    @classmethod
    def from_polynomial(cls, f, names):
        domain = f.ring.domain
        if characteristic(domain) == 2:
            raise ValueError("quadratic forms need characteristic different from 2")
        ring_names = variable_names(f)
        idx = [ring_names.index(n) for n in names]
        n = len(names)
        gram = [[domain.zero] * n for _ in range(n)]
        two = domain(2)
        for m, c in f.items():
            if sum(m) != 2:
                continue
            support = [k for k, i in enumerate(idx) if m[i]]
            if sum(m[i] for i in idx) != 2:
                raise ValueError("quadratic part involves variables outside the list")
            if len(support) == 1:
                k = support[0]
                gram[k][k] += c
            else:
                a, b = support
                gram[a][b] += c / two
                gram[b][a] += c / two
        return cls(gram, list(names), domain, f)

    @property
    def rank(self):
        return rank(ExactMatrix(self.gram, self.domain))

    def radical(self):
        """Names of the variables that do not occur in the form."""
        return [n for k, n in enumerate(self.names)
                if all(not self.gram[k][j] for j in range(len(self.names)))]


def quadratic_rank(f, names):
    """Rank of the degree-2 part of f in the variables ``names``."""
    low = min((sum(m) for m in f.keys()), default=2)
    if low < 2:
        raise ValueError("the polynomial has a constant or linear part")
    return QuadraticForm.from_polynomial(f, names).rank


def jacobian_rank(matrix, domain=None):
    """Rank of a matrix of ground elements (an evaluated Jacobian)."""
    if not matrix:
        return 0
    domain = domain or QQ
    return rank(ExactMatrix([list(r) for r in matrix], domain))
