#!/usr/bin/env python3
"""
Module that contains the command line app.

Sub-commands:
  list       registry entries with their claims
  verify     run the checks and write a report
  derive     relations among the sections, compared with the stored table
  enumerate  GF(p) points of a model, per fiber or with singular points
"""
import argparse
import json
import logging
import os
import platform
import sys
import time
from dataclasses import dataclass, field as dc_field
from importlib.metadata import PackageNotFoundError, version
from multiprocessing import cpu_count

import numpy as np
import pandas as pd
import sympy

from isbv.algebra import characteristic, parse_field
from isbv.cache import BasisCache, default_cache_dir
from isbv.ffenum import Ambient, enumerate_points, fiber_count
from isbv.groebner import DEFAULT_BUDGET, set_basis_store
from isbv.models import ModelError, apply_mutation, builtin_models, load_model
from isbv.verify import CHECKS, CheckOptions, derive_relations, run_suite

try:
    __version__ = version('isbv')
except PackageNotFoundError:
    __version__ = 'unknown'

DEFAULT_PRIMES = (3, 5, 7)


@dataclass
class RunConfig:
    """Everything a verify run depends on; serialized into every report."""
    models: list
    checks: list
    field: str = 'Q'
    primes: tuple = DEFAULT_PRIMES
    dmax: int = 3
    jobs: int = 0
    seed: int = 42
    deterministic: bool = False
    budget: int = DEFAULT_BUDGET
    closure_budget: int = 5000
    samples: int = 500
    scan_samples: int = 4
    report: str = None
    fmt: str = 'json'
    cache_dir: str = None
    use_cache: bool = True
    audit_cache: bool = False
    allow_skip: bool = False
    mutations: list = dc_field(default_factory=list)
    model_files: list = dc_field(default_factory=list)

    @classmethod
    def from_args(cls, args, registry):
        if args.all or not args.models:
            models = list(registry)
        else:
            models = [n.strip() for m in args.models for n in m.split(',') if n.strip()]
        unknown = [m for m in models if m not in registry]
        if unknown:
            raise ValueError(f"unknown model(s) {', '.join(unknown)}; known: {', '.join(registry)}")
        checks = [c.strip() for c in args.checks.split(',')] if args.checks else list(CHECKS)
        unknown = [c for c in checks if c not in CHECKS]
        if unknown:
            raise ValueError(f"unknown check(s) {', '.join(unknown)}; known: {', '.join(CHECKS)}")
        domains = parse_field(args.field)
        primes = DEFAULT_PRIMES if domains[0].is_QQ else tuple(characteristic(d) for d in domains)
        if args.dmax < 1:
            raise ValueError("--dmax must be at least 1")
        return cls(
            models=models, checks=checks, field=args.field, primes=primes, dmax=args.dmax,
            jobs=args.jobs, seed=42 if args.seed is None else args.seed,
            deterministic=args.deterministic or args.seed is not None,
            budget=args.budget, closure_budget=args.closure_budget, samples=args.samples,
            scan_samples=args.scan_samples, report=args.report, fmt=args.format,
            cache_dir=str(args.cache_dir or default_cache_dir()), use_cache=args.use_cache,
            audit_cache=args.audit_cache, allow_skip=args.allow_skip,
            mutations=list(args.mutations or []), model_files=list(args.model_files or []))

    def options(self):
        return CheckOptions(primes=tuple(self.primes), dmax=self.dmax, budget=self.budget,
                            closure_budget=self.closure_budget, seed=self.seed,
                            samples=self.samples, scan_samples=self.scan_samples)

    def processes(self):
        max_proc = max(cpu_count() - 1, 1)
        if self.jobs:
            max_proc = min(max_proc, self.jobs)
        return max_proc

    def as_dict(self):
        d = dict(vars(self))
        d['primes'] = list(self.primes)
        if self.deterministic:
            d.pop('cache_dir')
        return d


def versions():
    return {'isbv': __version__, 'python': platform.python_version(),
            'sympy': sympy.__version__, 'numpy': np.__version__, 'pandas': pd.__version__}


def load_registry(model_files=()):
    """Built-in models followed by user model files, keyed by name."""
    registry = builtin_models()
    for path in model_files:
        model = load_model(path)
        if model.name in registry:
            logging.warning("model file %s replaces the model %s", path, model.name)
        registry[model.name] = model
    return registry


def build_report(config, report, started):
    doc = report.as_dict(config.deterministic)
    doc['run'] = {'config': config.as_dict(), 'versions': versions(),
                  'started': 'fixed' if config.deterministic else started,
                  'environment': report.environment}
    return doc


def report_frame(doc):
    rows = [{'name': c['name'], 'model': c['model'], 'status': c['status'], 'millis': c['millis'],
             'witness': json.dumps(c['witness'], sort_keys=True)} for c in doc['checks']]
    return pd.DataFrame(rows, columns=['name', 'model', 'status', 'millis', 'witness'])


def markdown_table(df):
    lines = ['| ' + ' | '.join(df.columns) + ' |', '|' + '---|' * len(df.columns)]
    for row in df.itertuples(index=False):
        cells = [str(v).replace('|', '\\|') for v in row]
        lines.append('| ' + ' | '.join(cells) + ' |')
    return '\n'.join(lines) + '\n'


def render_report(doc, fmt):
    if fmt == 'json':
        return json.dumps(doc, sort_keys=True, indent=2) + '\n'
    df = report_frame(doc)
    if fmt == 'csv':
        return df.to_csv(index=False)
    s = doc['summary']
    head = f"# isbv report\n\npass {s['pass']}, fail {s['fail']}, skipped {s['skipped']}\n\n"
    return head + markdown_table(df[['name', 'model', 'status', 'millis']]) + \
        '\n## Witnesses\n\n' + markdown_table(df[['name', 'model', 'witness']])


# each subcommand takes one of these functions as default


def list_run(args):
    try:
        registry = load_registry(args.model_files or [])
    except (ModelError, OSError) as e:
        sys.exit(f"cannot load model file: {e}")
    rows = []
    for model in registry.values():
        entry = model.summary()
        entry['description'] = model.description
        rows.append(entry)
    df = pd.DataFrame(rows, columns=['name', 'types', 'equations', 'sections', 'claims', 'description'])
    print(df.to_string(index=False))
    print(f"{len(registry)} models")


def verify_run(args):
    try:
        registry = load_registry(args.model_files or [])
        config = RunConfig.from_args(args, registry)
        models = []
        for name in config.models:
            model = registry[name]
            for spec in config.mutations:
                model = apply_mutation(model, spec)
            models.append(model)
    except (ModelError, OSError, ValueError) as e:
        sys.exit(str(e))

    store = None
    if config.use_cache:
        store = BasisCache(config.cache_dir, audit=config.audit_cache)
    set_basis_store(store)
    logging.info('will run %s on %s with %u worker(s)', ','.join(config.checks),
                 ','.join(config.models), config.processes())
    started = time.strftime('%Y-%m-%dT%H:%M:%S')
    report = run_suite(models, config.checks, config.options(), config.processes(), store)
    if store is not None:
        logging.info('cache: %s', store.stats())
    doc = build_report(config, report, started)
    text = render_report(doc, config.fmt)
    if config.report:
        with open(config.report, 'w', encoding='utf-8') as f:
            f.write(text)
        for r in report.results:
            print(f"{r.status:8} {r.name:11} {r.model}")
        print(f"report written to {config.report}")
    else:
        sys.stdout.write(text)
    status = report.status(config.allow_skip)
    logging.info('verify finished: %s %s', status, report.summary())
    sys.exit(0 if status == 'pass' else 1)


def derive_run(args):
    try:
        registry = load_registry(args.model_files or [])
    except (ModelError, OSError) as e:
        sys.exit(f"cannot load model file: {e}")
    if args.model not in registry:
        sys.exit(f"unknown model {args.model}")
    model = registry[args.model]
    if model.sections is None:
        sys.exit(f"{model.name} has no sections to derive relations from")
    derived = derive_relations(model, args.degree, args.constrained)
    kind = 'constrained over QQ' if args.constrained else 'generic'
    print(f"# {model.name}, degree {args.degree}: {len(derived.relations)} relations ({kind})")
    for i, text in enumerate(derived.relations, 1):
        print(f"r{i} = {text}")
    if args.constrained or not derived.combinations and not derived.unexpressed:
        return
    print(f"# table rank {derived.table_rank} of {len(derived.relations)}")
    for row, coeffs in derived.combinations.items():
        terms = ' + '.join(f"({c})*r{j}" for j, c in coeffs) or '0'
        print(f"row {row} = {terms}")
    if derived.unexpressed:
        print(f"# rows outside the derived space: {', '.join(map(str, derived.unexpressed))}")


def _point_text(point, model):
    nb = len(model.base_vars)
    parts = [','.join(map(str, point[:nb]))] if nb else []
    i = nb
    for block in model.blocks:
        parts.append(':'.join(map(str, point[i:i + len(block)])))
        i += len(block)
    return '(' + '; '.join(parts) + ')'


def enumerate_run(args):
    try:
        registry = load_registry(args.model_files or [])
    except (ModelError, OSError) as e:
        sys.exit(f"cannot load model file: {e}")
    if args.model not in registry:
        sys.exit(f"unknown model {args.model}")
    model = registry[args.model]
    m = model.descended()
    try:
        if args.base:
            values = [int(v) for v in args.base.split(',')]
            if len(values) != len(m.base_vars):
                sys.exit(f"--base needs {len(m.base_vars)} values ({','.join(m.base_vars)})")
            n = fiber_count(model, values, args.p)
            print(f"{model.name} over GF({args.p}) at ({args.base}): {n} points")
            return
        rank = m.smooth_rank if m.equations else None
        scan = enumerate_points(m.polynomials, Ambient.of(m), args.p, smooth_rank=rank)
    except ValueError as e:
        sys.exit(str(e))
    if not args.singular_only:
        print(f"{model.name} over GF({args.p}): {scan.on_variety} points "
              f"({scan.examined} examined, {scan.seconds:.1f} s)")
    if not scan.singular:
        print("singular points: none")
        return
    print(f"singular points: {len(scan.singular)}")
    for point, r in scan.singular:
        print(f"{_point_text(point, m)} jacobian rank {r}")


def main():
    """Parse command line, run default functions."""
    version_parser = argparse.ArgumentParser(add_help=False)

    version_parser.add_argument(
        '-v', '--version', action='version', version=__version__)

    models_parser = argparse.ArgumentParser(add_help=False)

    models_parser.add_argument("--model-file", metavar='JSON', type=str, dest="model_files",
                               action='append', help="additional model file (repeatable)")

    parser = argparse.ArgumentParser(
        usage='%(prog)s <subcommand> [options]',
        epilog="Run `isbv subcommand -h` for more help",
        parents=[version_parser])

    subparsers = parser.add_subparsers(
        title='sub-commands', help='available sub-commands')

    parser_list = subparsers.add_parser(
        'list', help='list the model registry', parents=[version_parser, models_parser])
    parser_list.set_defaults(func=list_run)

    parser_verify = subparsers.add_parser(
        'verify', help='run checks on models', parents=[version_parser, models_parser])

    parser_verify.add_argument("-m", "--model", metavar='NAME', type=str, dest="models",
                               action='append', help="model name(s), comma separated or repeated")

    parser_verify.add_argument("--all", action='store_true', dest="all",
                               help="all registry models (default when no --model is given)")

    parser_verify.add_argument("-c", "--checks", metavar='LIST', type=str, dest="checks", default=None,
                               help=f"comma separated checks out of {','.join(CHECKS)} (default: all)")

    parser_verify.add_argument("-f", "--field", metavar='Q|p:PRIMES', type=str, dest="field", default='Q',
                               help="Q or p:<prime>[,<prime>...]; with Q the finite field checks use 3,5,7")

    parser_verify.add_argument("-d", "--dmax", metavar='INT', type=int, dest="dmax", default=3,
                               help="highest degree of the flatness check")

    parser_verify.add_argument("-t", "--jobs", metavar='INT', type=int, dest="jobs", default=0,
                               help="limit maximum number of parallel workers\n(0: CPUs count-1, n: limit to n)")

    parser_verify.add_argument("-R", "--seed", metavar='INT', type=int, dest="seed", default=None,
                               help="seed for sampled scans; implies --deterministic")

    parser_verify.add_argument("--deterministic", action='store_true', dest="deterministic",
                               help="zero wall times and start stamp so reports are byte-identical")

    parser_verify.add_argument("-o", "--report", metavar='PATH', type=str, dest="report", default=None,
                               help="write the report here instead of standard output")

    parser_verify.add_argument("--format", type=str, dest="format", default='json',
                               choices=['json', 'markdown', 'csv'], help="report format")

    parser_verify.add_argument("--budget", metavar='STEPS', type=int, dest="budget",
                               default=DEFAULT_BUDGET, help="S-pair reductions per Groebner basis")

    parser_verify.add_argument("--closure-budget", metavar='STEPS', type=int, dest="closure_budget",
                               default=5000, help="budget of the freeness closure sub-check")

    parser_verify.add_argument("--samples", metavar='INT', type=int, dest="samples", default=500,
                               help="sampled freeness specializations for primes above 3")

    parser_verify.add_argument("--scan-samples", metavar='INT', type=int, dest="scan_samples", default=4,
                               help="base points off the divisors in sampled smoothness scans")

    parser_verify.add_argument("--cache-dir", metavar='DIR', type=str, dest="cache_dir", default=None,
                               help="Groebner basis cache (default $ISBV_CACHE or ~/.cache/isbv)")

    parser_verify.add_argument("--no-cache", action='store_false', dest="use_cache",
                               help="do not read or write the Groebner basis cache")

    parser_verify.add_argument("--audit-cache", action='store_true', dest="audit_cache",
                               help="recompute every cache hit and compare")

    parser_verify.add_argument("--allow-skip", action='store_true', dest="allow_skip",
                               help="skipped checks do not make the exit code nonzero")

    parser_verify.add_argument("--mutate", metavar='SPEC', type=str, dest="mutations", action='append',
                               help="test only: drop-row:i, swap-sections:i,j, basis:i=mono, "
                                    "subring:i=name, scale:i=mono")

    parser_verify.set_defaults(func=verify_run)

    parser_derive = subparsers.add_parser(
        'derive', help='derive the relations from the sections', parents=[version_parser, models_parser])

    parser_derive.add_argument("model", metavar='MODEL', type=str, help="model name")

    parser_derive.add_argument("--degree", metavar='INT', type=int, dest="degree", default=2,
                               help="degree of the relations")

    parser_derive.add_argument("--constrained", action='store_true', dest="constrained",
                               help="QQ-basis of the coefficient-constrained relations instead")

    parser_derive.set_defaults(func=derive_run)

    parser_enum = subparsers.add_parser(
        'enumerate', help='count GF(p) points', parents=[version_parser, models_parser])

    parser_enum.add_argument("model", metavar='MODEL', type=str, help="model name")

    parser_enum.add_argument("-p", "--p", metavar='PRIME', type=int, dest="p", required=True,
                             help="odd prime")

    parser_enum.add_argument("--base", metavar='a,b', type=str, dest="base", default=None,
                             help="count the fiber over this base point only")

    parser_enum.add_argument("--singular-only", action='store_true', dest="singular_only",
                             help="print only the singular points")

    parser_enum.set_defaults(func=enumerate_run)

    # exit so that log file is not written
    if len(sys.argv) == 1 or sys.argv[1] == '-h' or sys.argv[1] == '--help':
        parser.print_help()
        sys.exit()

    logging.basicConfig(filename='isbv.log', level=logging.DEBUG,
                        format='%(levelname)s %(asctime)s %(filename)s: %(funcName)s() %(lineno)d: \t%(message)s',
                        datefmt='%Y/%m/%d %H:%M:%S',
                        force=True)

    logging.info(' '.join(sys.argv))
    logging.info('isbv version:%s', __version__)

    args = parser.parse_args()
    if not hasattr(args, 'func'):
        parser.print_help()
        sys.exit(2)
    if os.environ.get('ISBV_CACHE'):
        logging.info('cache directory from ISBV_CACHE: %s', os.environ['ISBV_CACHE'])
    args.func(args)


if __name__ == "__main__":
    main()
