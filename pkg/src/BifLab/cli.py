# cli.py
"""
Command line front end:

    bifbm <kind> --config <path> [--out <dir>] [--seed <u64>] [--threads <n>] [--verbose]
    bifbm list
    bifbm describe <kind>
"""

import sys
import logging
import argparse

import qcodes as qc
from qcodes.logger import start_logger

from .config import KINDS, ExperimentConfig, describe, list_experiments
from .runner import EXIT_CONFIG_ERROR, exit_code, run
from .util import BifLabException, ConfigException

log = logging.getLogger(__name__)


def _seed(text):
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f'seed must be an unsigned 64-bit integer, got {text}.')
    return value


def _threads(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f'threads must be at least 1, got {text}.')
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog='bifbm',
                                     description='Numerical verification experiments for bifractional '
                                                 'Brownian motion.')
    sub = parser.add_subparsers(dest='command', required=True)
    for kind, spec in KINDS.items():
        p = sub.add_parser(kind, help=spec['description'])
        p.add_argument('--config', required=True, help='Experiment configuration (JSON, schema v1).')
        p.add_argument('--out', default=None, help='Output directory; overrides output.dir.')
        p.add_argument('--seed', type=_seed, default=None, help='Master seed; overrides monte_carlo.seed.')
        p.add_argument('--threads', type=_threads, default=None,
                       help='Worker threads (default: BIFBM_THREADS, else 1). Never changes results.')
        p.add_argument('--verbose', action='store_true', help='Log progress at INFO level.')
    sub.add_parser('list', help='List the experiment kinds as JSON.')
    p = sub.add_parser('describe', help='Required fields and defaults of one kind, as JSON.')
    p.add_argument('kind')
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == 'list':
        print(list_experiments())
        return 0
    if args.command == 'describe':
        try:
            print(describe(args.kind))
        except ConfigException as e:
            print(e, file=sys.stderr)
            return EXIT_CONFIG_ERROR
        return 0

    qc.config.logger.console_level = 'INFO' if args.verbose else 'WARNING'
    start_logger()
    try:
        config = ExperimentConfig.init_from_json(args.config)
        if config.kind != args.command:
            raise ConfigException(f'Configuration kind "{config.kind}" does not match the command "{args.command}".')
        report = run(config, threads=args.threads, seed=args.seed, out=args.out, suppress_output=not args.verbose)
    except BifLabException as e:
        log.error(f'{args.command} failed: {e}')
        print(e, file=sys.stderr)
        return exit_code(e)

    for name in report.failed_metrics:
        print(f'FAIL {name}', file=sys.stderr)
    return report.exit_code


if __name__ == '__main__':
    sys.exit(main())
