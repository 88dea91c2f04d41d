__all__ = ['build_parser', 'main', 'num_workers']

# Internal Cell
#exporti
import argparse
import logging
import os
import sys

from .config import ExperimentConfig
from .analysis import generate_splits, train_autoencoders, train_integrator, run_rollout, run_eval, run_sweep
from .shared import ConfigError, NumericalError, PylatsError, get_logger

COMMANDS = ('generate', 'train-ae', 'train-ti', 'rollout', 'eval', 'sweep')

# Cell
def num_workers():
    """Worker processes for sample generation, from PYLATS_NUM_WORKERS (default 1)."""
    text = os.environ.get('PYLATS_NUM_WORKERS', '1')
    try:
        n = int(text)
    except ValueError:
        raise ConfigError('Error: PYLATS_NUM_WORKERS must be an integer, got ' + repr(text))
    if n < 1:
        raise ConfigError('Error: PYLATS_NUM_WORKERS must be >= 1, got ' + str(n))
    return n


def build_parser():
    parser = argparse.ArgumentParser(
        prog='pylats', description='Latent time stepping surrogates for transient PDEs on decomposed grids.')
    sub = parser.add_subparsers(dest='command', required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument('--config', required=True, help='experiment INI file')
        p.add_argument('--seed', type=int, default=None, help='overrides [experiment] seed')
        p.add_argument('--out', default=None, help='overrides [experiment] out')
        p.add_argument('--verbose', action='store_true', help='log at DEBUG level')
    return parser

# Internal Cell
def _run(cfg, command):
    if command == 'generate':
        generate_splits(cfg, num_workers())
    elif command == 'train-ae':
        train_autoencoders(cfg)
    elif command == 'train-ti':
        train_integrator(cfg)
    elif command == 'rollout':
        run_rollout(cfg)
    elif command == 'eval':
        report, base = run_eval(cfg)
        print('nRMSE {:.6g}  persistence nRMSE {:.6g}'.format(report.aggregate, base.aggregate))
        print(report.per_variable.to_string())
    elif command == 'sweep':
        table = run_sweep(cfg)
        print(table.to_string(index=False))

# Cell
def main(argv=None):
    """
    Entry point of the `pylats` console script. Returns 0 on success, 1 for an invalid configuration,
    missing inputs or inconsistent shapes, 2 when training or rollout hit non-finite values.
    """
    args = build_parser().parse_args(argv)
    logger = get_logger('pylats', logging.DEBUG if args.verbose else logging.INFO)
    try:
        cfg = ExperimentConfig.read(args.config).with_overrides(args.seed, args.out).validate()
        _run(cfg, args.command)
    except NumericalError as e:
        logger.error('%s (at %s)', e, e.where)
        return 2
    except PylatsError as e:
        logger.error(str(e))
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
