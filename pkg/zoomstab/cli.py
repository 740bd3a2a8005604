"""Command line interface.

This module is part of zoomstab --
Adaptive zoom quantized control over noisy channels

Copyright 2026 The zoomstab developers

Usage::

    zoomstab simulate experiments/s1.yaml --replicas 4 --out s1.jsonl
    zoomstab capacity --bsc 0.1
    zoomstab exponent --bsc 0.1 --rate 0.2
    zoomstab kappa --a 2 --delta 2 --alpha 0.5
    zoomstab check-conditions --a 1.2 --delta 0.3 --alpha 0.98 --kappa 0.51 \\
        --n 8 --pbar 1e-3 --mode a0
    zoomstab analyze s1.jsonl

Exit status is 0 when the command ran, 2 for an invalid configuration or
parameter and 3 when ``--assert`` is given and an acceptance criterion fails.
"""
# zoomstab is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# zoomstab is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with zoomstab. If not, see <https://www.gnu.org/licenses/>.
import argparse
import json
import sys

from zoomstab.__about__ import __version__
from zoomstab.channel import DmcModel
from zoomstab.config import load_config
from zoomstab.experiment import (check_acceptance, json_default,
                                 read_results, run_experiment, summarize)
from zoomstab.infotheory import (capacity_threshold,
                                 check_second_moment_conditions,
                                 cutoff_rate, dmc_capacity, kappa_bound,
                                 random_coding_exponent, required_exponent)
from zoomstab.misc import ConfigError, DomainError, ResultsWriteError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ASSERT = 3


def _print_json(record):
    print(json.dumps(record, indent=2, default=json_default))


def _add_channel_args(parser):
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument('--bsc', type=float, metavar='EPS',
                       help='binary symmetric channel')
    group.add_argument('--erasure', type=float, metavar='EPS',
                       help='binary erasure channel')
    group.add_argument('--noiseless', type=int, metavar='K',
                       help='noiseless K-ary channel')
    group.add_argument('--symmetric', type=float, nargs=2,
                       metavar=('K', 'EPS'), help='K-ary symmetric channel')
    group.add_argument('--matrix', type=str, metavar='JSON',
                       help='row-stochastic transition matrix as JSON')


def _channel_from_args(args):
    if args.bsc is not None:
        return DmcModel.bsc(args.bsc)
    if args.erasure is not None:
        return DmcModel.erasure(args.erasure)
    if args.noiseless is not None:
        return DmcModel.noiseless(args.noiseless)
    if args.symmetric is not None:
        k, eps = args.symmetric
        if int(k) != k:
            raise ConfigError('the alphabet size must be an integer')
        return DmcModel.symmetric(int(k), eps)
    try:
        matrix = json.loads(args.matrix)
    except json.JSONDecodeError as err:
        raise ConfigError('--matrix is not valid JSON: {}'.format(err))
    return DmcModel.from_matrix(matrix)


def _pool(workers):
    if workers is None or workers <= 1:
        return None
    try:
        from schwimmbad import MultiPool
    except ImportError:
        raise ConfigError('--workers > 1 needs the optional dependency '
                          'schwimmbad (pip install zoomstab[multiprocessing])')
    return MultiPool(processes=workers)


def cmd_simulate(args):
    cfg = load_config(args.config, flag_seed=args.seed)
    if any(v is not None for v in (args.replicas, args.out, args.workers)):
        cfg = cfg.with_overrides(master_seed=cfg.master_seed,
                                 replicas=args.replicas, output=args.out,
                                 workers=args.workers)
    pool = _pool(cfg.workers)
    try:
        _, summary = run_experiment(cfg, pool=pool, verbosity=args.verbose,
                                    return_summary=True)
    finally:
        if pool is not None:
            pool.close()
    _print_json(summary)
    if args.do_assert:
        failures = check_acceptance(summary, cfg.acceptance)
        for failure in failures:
            print('acceptance failed: {}'.format(failure), file=sys.stderr)
        if failures:
            return EXIT_ASSERT
    return EXIT_OK


def cmd_capacity(args):
    ch = _channel_from_args(args)
    res = dmc_capacity(ch, tol=args.tol)
    record = {'capacity_bits': res.capacity_bits,
              'optimal_input_dist': res.optimal_input_dist,
              'bracket': list(res.bracket), 'iterations': res.iterations}
    if args.eigenvalues:
        record['threshold'] = capacity_threshold(res.capacity_bits,
                                                 args.eigenvalues)
    _print_json(record)
    return EXIT_OK


def cmd_exponent(args):
    ch = _channel_from_args(args)
    E, rho, Q = random_coding_exponent(ch, args.rate, args.grid_step,
                                       full_output=True)
    _print_json({'rate_bits': args.rate, 'exponent_bits': E, 'rho': rho,
                 'input_dist': Q, 'cutoff_rate_bits': cutoff_rate(ch)})
    return EXIT_OK


def cmd_kappa(args):
    bound = kappa_bound(args.a, args.delta, args.alpha, args.slack)
    record = {'kappa_bound': bound}
    if args.kappa is not None:
        record['kappa'] = args.kappa
        record['required_exponent_bits'] = required_exponent(
            args.a, args.delta, args.kappa)
    _print_json(record)
    return EXIT_OK


def cmd_check_conditions(args):
    probs = {'Pgg': args.pgg, 'PZg': args.pzg, 'PgZ': args.pgz,
             'Pbar': args.pbar}
    report = check_second_moment_conditions(
        args.a, args.delta, args.alpha, args.kappa, args.n, probs, args.mode,
        K=args.K, slack=args.slack, exponent=args.exponent)
    _print_json(report.to_dict())
    if args.do_assert and not report.satisfied:
        return EXIT_ASSERT
    return EXIT_OK


def cmd_analyze(args):
    records, summaries = read_results(args.results)
    if not records:
        raise ConfigError('{} holds no replica records'.format(args.results))
    last = summaries[-1] if summaries else {}
    kappa = last.get('tail', {}).get('kappa')
    summary = summarize(records, last.get('error_probabilities'), kappa)
    _print_json(summary)
    if args.do_assert and summary.get('tail', {}).get('verdict') == \
            'violated':
        return EXIT_ASSERT
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog='zoomstab',
        description='Adaptive zoom quantized control over noisy channels')
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + __version__)
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('simulate', help='run a closed-loop experiment')
    p.add_argument('config', help='YAML experiment configuration')
    p.add_argument('--seed', type=int, help='master seed (overrides '
                   'ZOOMSTAB_SEED and the file)')
    p.add_argument('--replicas', type=int)
    p.add_argument('--out', help='results file (JSON lines, appended)')
    p.add_argument('--workers', type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser('capacity', help='DMC capacity')
    _add_channel_args(p)
    p.add_argument('--tol', type=float, default=1e-9)
    p.add_argument('--eigenvalues', type=float, nargs='*',
                   help='compare with the stabilization threshold')
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser('exponent', help='random-coding error exponent')
    _add_channel_args(p)
    p.add_argument('--rate', type=float, required=True,
                   help='bits per channel use')
    p.add_argument('--grid-step', type=float, default=1e-3)
    p.set_defaults(func=cmd_exponent)

    p = sub.add_parser('kappa', help='bound on the under-zoom error fraction')
    p.add_argument('--a', type=float, required=True)
    p.add_argument('--delta', type=float, required=True)
    p.add_argument('--alpha', type=float, required=True)
    p.add_argument('--slack', type=float, default=0.)
    p.add_argument('--kappa', type=float)
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser('check-conditions',
                       help='second-moment stability conditions')
    for name in ('a', 'delta', 'alpha', 'kappa'):
        p.add_argument('--' + name, type=float, required=True)
    p.add_argument('--n', type=int, required=True)
    for name in ('pgg', 'pzg', 'pgz', 'pbar'):
        p.add_argument('--' + name, type=float, default=0.)
    p.add_argument('--mode', choices=('general', 'uniform', 'a0'),
                   default='general')
    p.add_argument('--K', type=int)
    p.add_argument('--slack', type=float, default=0.)
    p.add_argument('--exponent', type=float,
                   help='random-coding exponent in bits')
    p.set_defaults(func=cmd_check_conditions)

    p = sub.add_parser('analyze', help='summarize a results file')
    p.add_argument('results')
    p.set_defaults(func=cmd_analyze)

    for p in sub.choices.values():
        p.add_argument('--assert', dest='do_assert', action='store_true',
                       help='exit with status 3 if a criterion fails')
        p.add_argument('-v', '--verbose', action='count', default=0)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError) as err:
        print('error: {}'.format(err), file=sys.stderr)
        return EXIT_CONFIG
    except ResultsWriteError as err:
        print('error: {} ({} records completed)'.format(
            err, len(err.records)), file=sys.stderr)
        return 1
