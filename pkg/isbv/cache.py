"""Content-addressed on-disk store for reduced Groebner bases.

An entry is keyed by the sha256 of the canonical generator text, the
monomial order and the coefficient domain. Entries are JSON files written
atomically under an advisory lock; unreadable entries are dropped with a
warning and recomputed.
"""
import fcntl
import hashlib
import json
import logging
import os
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

from isbv.algebra import format_poly, variable_names
from isbv.groebner import buchberger


def default_cache_dir():
    return Path(os.environ.get('ISBV_CACHE') or Path.home() / '.cache' / 'isbv')


def _cacheable(domain):
    return domain.is_QQ or domain.is_FiniteField


def _coeff_text(c, domain):
    if domain.is_FiniteField:
        return str(int(domain.to_int(c)) % int(domain.characteristic()))
    return f"{domain.numer(c)}/{domain.denom(c)}"


def _coeff_value(text, domain):
    if domain.is_FiniteField:
        return domain(int(text))
    num, den = text.split('/')
    return domain(int(num), int(den))


def entry_key(generators, order):
    """Hex digest identifying (generators, order, domain)."""
    R = generators[0].ring
    text = '\n'.join([str(order), str(R.domain), ','.join(variable_names(generators[0]))]
                     + [format_poly(g) for g in generators])
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def encode_basis(basis):
    """Canonical JSON-ready form: per polynomial, sorted ``[exponents, coeff]`` terms."""
    out = []
    for g in basis:
        domain = g.ring.domain
        out.append([[list(m), _coeff_text(c, domain)] for m, c in sorted(g.items())])
    return out


def decode_basis(data, ring):
    return [ring.from_dict({tuple(m): _coeff_value(c, ring.domain) for m, c in terms})
            for terms in data]


@dataclass
class CacheEntry:
    key: str
    order: str
    domain: str
    names: list
    generators: list
    basis: list

    def as_dict(self):
        return vars(self)


class BasisCache:
    """Store plugged into :func:`isbv.groebner.set_basis_store`.

    Attributes:
        directory: where entries live.
        audit: when set, every hit is recomputed and compared byte-wise.
        hits, misses, mismatches: counters for the current process.
    """

    def __init__(self, directory=None, audit=False):
        self.directory = Path(directory) if directory else default_cache_dir()
        self.directory.mkdir(parents=True, exist_ok=True)
        self.audit = audit
        self.hits = 0
        self.misses = 0
        self.mismatches = 0

    def path(self, key):
        return self.directory / key[:2] / f"{key}.json"

    @contextmanager
    def _locked(self):
        with open(self.directory / '.lock', 'a') as lock:
            fcntl.flock(lock, fcntl.LOCK_EX)
            try:
                yield
            finally:
                fcntl.flock(lock, fcntl.LOCK_UN)

    def fetch(self, generators, order):
        if not generators or not _cacheable(generators[0].ring.domain):
            return None
        key = entry_key(generators, order)
        path = self.path(key)
        if not path.exists():
            self.misses += 1
            logging.debug("cache miss %s", key[:12])
            return None
        try:
            data = json.loads(path.read_text(encoding='utf-8'))
            if data['key'] != key:
                raise ValueError("key mismatch")
            basis = decode_basis(data['basis'], generators[0].ring)
        except (OSError, ValueError, KeyError, TypeError) as e:
            logging.warning("dropping corrupted cache entry %s: %s", path, e)
            path.unlink(missing_ok=True)
            self.misses += 1
            return None
        self.hits += 1
        logging.debug("cache hit %s", key[:12])
        if self.audit:
            fresh = buchberger(generators, order)
            if encode_basis(fresh) != data['basis']:
                self.mismatches += 1
                logging.warning("cache entry %s differs from a fresh computation", key[:12])
                self.save(generators, order, fresh)
                return fresh
        return basis

    def save(self, generators, order, basis):
        if not generators or not _cacheable(generators[0].ring.domain):
            return
        key = entry_key(generators, order)
        entry = CacheEntry(key, str(order), str(generators[0].ring.domain),
                           list(variable_names(generators[0])),
                           [format_poly(g) for g in generators], encode_basis(basis))
        path = self.path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".{os.getpid()}.tmp")
        with self._locked():
            tmp.write_text(json.dumps(entry.as_dict(), sort_keys=True), encoding='utf-8')
            os.replace(tmp, path)

    def stats(self):
        return {'hits': self.hits, 'misses': self.misses, 'mismatches': self.mismatches}
