"""Command-line drivers for calibration, estimation and the studies.

Every command reads the configuration (defaults, ``NOONCAL_*`` environment,
``--config`` file, then command flags) and writes CSV or estimator text to
``--out`` or stdout. The effective configuration is written as ``# KEY = value``
comment lines, so an output file carries everything needed to rerun it.
"""
import argparse
import logging
import sys

import numpy as np

from config import load_config

from .calibrator import calibrate, dump_estimator, estimate, load_estimator
from .errors import CalibrationError
from .experiments import (
    DEFAULT_ACQUISITIONS,
    StudySettings,
    acquisition_events,
    calibration_phases,
    crb_csv,
    default_eval_phases,
    estimate_csv,
    evaluate_error,
    evaluation_csv,
    fm_csv,
    fm_detail_csv,
    fm_table,
    load_record_csv,
    record_csv,
    scaling_csv,
    simulate_record,
    sweep_bootstrap,
    sweep_csv,
    sweep_neurons,
    uncertainty_scaling,
)
from .network import Topology
from .rng import derive_seed
from .sensor import CountVector, SensorModel

log = logging.getLogger(__name__)

FM_STEP_DEG = 2.0
SCALING_PHASE_DEG = 45.0
SCALING_EVENTS = (1000, 10000, 100000)


def setup_logging(verbose=False):
    """Log to stderr; ``verbose`` shows per-epoch training output."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(levelname)s %(name)s: %(message)s',
        stream=sys.stderr,
    )


def _int_list(text):
    try:
        return tuple(int(part) for part in text.split(',') if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected comma-separated integers, got {text!r}') from None


def _float_list(text):
    try:
        return tuple(float(part) for part in text.split(',') if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected comma-separated numbers, got {text!r}') from None


def _acquisitions(text):
    """``EXPOSURE[:RATE_FRACTION]`` pairs, e.g. ``0.5,1,4,0.5:0.3``."""
    pairs = []
    try:
        for part in text.split(','):
            if not part.strip():
                continue
            exposure, _, fraction = part.partition(':')
            pairs.append((float(exposure), float(fraction) if fraction else 1.0))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f'expected exposure[:rate fraction] pairs, got {text!r}') from None
    return tuple(pairs)


def _hidden(text):
    try:
        return Topology.parse(1, text).hidden_sizes
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected a layout such as 30 or 20x10, got {text!r}') from None


def build_parser():
    # Global flags are accepted before and after the command name.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', default=argparse.SUPPRESS,
                        help='key-value configuration file')
    common.add_argument('--seed', type=int, default=argparse.SUPPRESS, help='master seed')
    common.add_argument('--out', default=argparse.SUPPRESS, help='output path (default: stdout)')
    common.add_argument('--workers', type=int, default=argparse.SUPPRESS,
                        help='parallel trainings in sweeps')
    common.add_argument('-v', '--verbose', action='store_true', default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(
        prog='nooncal',
        description='Calibrate and evaluate a two-photon N00N phase sensor',
        parents=[common],
    )
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('simulate-record', parents=[common],
                       help='simulate a calibration scan as record CSV')
    p.add_argument('--step', type=float, help='phase step in degrees')
    p.add_argument('--exposure', type=float, help='exposure per phase in seconds')
    p.add_argument('--phase-min', type=float)
    p.add_argument('--phase-max', type=float)
    p.set_defaults(func=cmd_simulate_record)

    p = sub.add_parser('calibrate', parents=[common], help='train an estimator')
    p.add_argument('--record', help='record CSV (default: simulated)')
    p.add_argument('--hidden', type=_hidden, help='hidden layout, e.g. 30 or 20x10')
    p.add_argument('--n-b', type=int, help='bootstrap replicas per phase')
    p.add_argument('--step', type=float, help='step of the simulated record')
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser('estimate', parents=[common], help='estimate the phase of one count vector')
    p.add_argument('--estimator', help='estimator file (default: ESTIMATOR_PATH)')
    p.add_argument('--counts', type=_int_list, required=True, help='counts as a,b,c,d')
    p.add_argument('--exposure', type=float, default=1.0)
    p.add_argument('--n-b', type=int, help='bootstrap replicas')
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser('evaluate', parents=[common],
                       help='estimation error over repeated simulated acquisitions')
    p.add_argument('--estimator', help='estimator file (default: ESTIMATOR_PATH)')
    p.add_argument('--events', type=float, help='mean total events per acquisition')
    p.add_argument('--repetitions', type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser('sweep-neurons', parents=[common], help='error against hidden layout')
    p.add_argument('--hidden', help='comma-separated layouts, e.g. 5,10,20x10')
    p.add_argument('--trainings', type=int, help='trainings per layout')
    p.add_argument('--record', help='record CSV (default: simulated)')
    p.set_defaults(func=cmd_sweep_neurons)

    p = sub.add_parser('sweep-bootstrap', parents=[common], help='error against n_b')
    p.add_argument('--n-b', type=_int_list, help='comma-separated replica counts')
    p.add_argument('--trainings', type=int, help='trainings per value')
    p.add_argument('--record', help='record CSV (default: simulated)')
    p.set_defaults(func=cmd_sweep_bootstrap)

    p = sub.add_parser('crb-curve', parents=[common], help='Cramer-Rao bound over the phase range')
    p.add_argument('--events', type=float, help='total events M')
    p.add_argument('--step', type=float, help='phase step in degrees')
    p.set_defaults(func=cmd_crb_curve)

    p = sub.add_parser('fm-table', parents=[common], help='variance-to-CRB ratio per M')
    p.add_argument('--step', type=float, default=FM_STEP_DEG, help='training step in degrees')
    events = p.add_mutually_exclusive_group()
    events.add_argument('--events', type=_int_list, help='comma-separated M values')
    events.add_argument('--acquisitions', type=_acquisitions, nargs='?',
                        const=DEFAULT_ACQUISITIONS,
                        help='M from exposure[:rate fraction] pairs '
                             '(default: 0.5,1,4,0.5:0.3)')
    p.add_argument('--phases', type=_float_list, help='comma-separated test phases')
    p.add_argument('--detail', help='also write per-phase rows to this path')
    p.add_argument('--record', help='record CSV (default: simulated at --step)')
    p.set_defaults(func=cmd_fm_table)

    p = sub.add_parser('scaling', parents=[common],
                       help='median bootstrap uncertainty against M at one phase')
    p.add_argument('--estimator', help='estimator file (default: ESTIMATOR_PATH)')
    p.add_argument('--phase', type=float, default=SCALING_PHASE_DEG)
    p.add_argument('--events', type=_int_list, default=SCALING_EVENTS,
                   help='comma-separated M values')
    p.add_argument('--trials', type=int, help='acquisitions per M (default: REPETITIONS)')
    p.add_argument('--n-b', type=int, help='bootstrap replicas')
    p.set_defaults(func=cmd_scaling)

    return parser


def _emit(text, out):
    if out:
        with open(out, 'w', encoding='utf-8', newline='') as fh:
            fh.write(text)
        log.info('Wrote %s', out)
    else:
        sys.stdout.write(text)


def _comments(config, command):
    return [('command', command)] + config.as_items()


def _record(config, path):
    """Record from ``path`` or ``RECORD_PATH``, else simulated from the master seed."""
    path = path or config.RECORD_PATH
    if path:
        return load_record_csv(path)
    return _simulated_record(config)


def _simulated_record(config):
    settings = StudySettings.from_config(config)
    return simulate_record(SensorModel.from_config(config), settings.step_deg, settings.exposure,
                           derive_seed(config.SEED, 0), settings.phase_min, settings.phase_max)


def cmd_simulate_record(args, config):
    config.override(STEP_DEG=args.step, EXPOSURE_S=args.exposure,
                    PHASE_MIN_DEG=args.phase_min, PHASE_MAX_DEG=args.phase_max)
    # same record that calibrate simulates when it gets no --record
    record = _simulated_record(config)
    _emit(record_csv(record, _comments(config, args.command)), args.out)


def cmd_calibrate(args, config):
    config.override(HIDDEN_SIZES=args.hidden, N_B=args.n_b, STEP_DEG=args.step)
    settings = StudySettings.from_config(config)
    record = _record(config, args.record)
    estimator = calibrate(record, settings.topology(record.k), settings.train,
                          settings.n_b, config.SEED)
    _emit(dump_estimator(estimator), args.out or config.ESTIMATOR_PATH)


def cmd_estimate(args, config):
    config.override(N_B=args.n_b)
    estimator = load_estimator(args.estimator or config.ESTIMATOR_PATH)
    result = estimate(estimator, CountVector(args.counts, args.exposure), config.N_B, config.SEED)
    _emit(estimate_csv(result, _comments(config, args.command)), args.out)


def cmd_evaluate(args, config):
    config.override(EVAL_EVENTS=args.events, REPETITIONS=args.repetitions)
    estimator = load_estimator(args.estimator or config.ESTIMATOR_PATH)
    phases = default_eval_phases(config.EVAL_PHASES, estimator.phase_min, estimator.phase_max)
    evaluation = evaluate_error(estimator, SensorModel.from_config(config), phases,
                                config.REPETITIONS, config.EVAL_EVENTS, config.SEED)
    log.info('eps = %.4f deg over %d phases', evaluation.eps, len(phases))
    _emit(evaluation_csv(evaluation, _comments(config, args.command)), args.out)


def cmd_sweep_neurons(args, config):
    config.override(SWEEP_HIDDEN=args.hidden, N_TRAININGS=args.trainings)
    record = load_record_csv(args.record) if args.record else None
    result = sweep_neurons(SensorModel.from_config(config), config.SWEEP_HIDDEN,
                           config.N_TRAININGS, StudySettings.from_config(config),
                           config.SEED, record)
    _emit(sweep_csv(result, _comments(config, args.command)), args.out)


def cmd_sweep_bootstrap(args, config):
    config.override(SWEEP_N_B=args.n_b, N_TRAININGS=args.trainings)
    record = load_record_csv(args.record) if args.record else None
    result = sweep_bootstrap(SensorModel.from_config(config), config.SWEEP_N_B,
                             config.N_TRAININGS, StudySettings.from_config(config),
                             config.SEED, record)
    _emit(sweep_csv(result, _comments(config, args.command)), args.out)


def cmd_crb_curve(args, config):
    config.override(EVAL_EVENTS=args.events, STEP_DEG=args.step)
    phases = calibration_phases(config.STEP_DEG, config.PHASE_MIN_DEG, config.PHASE_MAX_DEG)
    if phases[-1] < config.PHASE_MAX_DEG:
        phases = np.append(phases, config.PHASE_MAX_DEG)
    _emit(crb_csv(SensorModel.from_config(config), phases, config.EVAL_EVENTS,
                  _comments(config, args.command)), args.out)


def cmd_fm_table(args, config):
    config.override(EVENT_COUNTS=args.events, TEST_PHASES_DEG=args.phases)
    model = SensorModel.from_config(config)
    if args.acquisitions:
        config.override(EVENT_COUNTS=acquisition_events(model, args.acquisitions))
    record = load_record_csv(args.record) if args.record else None
    table = fm_table(model, args.step, config.EVENT_COUNTS,
                     config.TEST_PHASES_DEG, StudySettings.from_config(config),
                     config.SEED, record)
    comments = _comments(config, args.command)
    _emit(fm_csv(table, comments), args.out)
    if args.detail:
        _emit(fm_detail_csv(table, comments), args.detail)


def cmd_scaling(args, config):
    config.override(N_B=args.n_b, REPETITIONS=args.trials)
    estimator = load_estimator(args.estimator or config.ESTIMATOR_PATH)
    medians, slope = uncertainty_scaling(estimator, SensorModel.from_config(config), args.phase,
                                         args.events, config.REPETITIONS, config.N_B, config.SEED)
    log.info('median delta_phi slope against M: %.3f', slope)
    _emit(scaling_csv(args.phase, args.events, medians, slope,
                      _comments(config, args.command)), args.out)


def main(argv=None):
    """Run one command; returns the process exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)
    args.out = getattr(args, 'out', None)
    setup_logging(getattr(args, 'verbose', False))

    try:
        config = load_config(getattr(args, 'config', None))
        config.override(SEED=getattr(args, 'seed', None), WORKERS=getattr(args, 'workers', None))
        args.func(args, config)
    except (CalibrationError, ValueError) as e:
        log.error('%s', e)
        return 1
    except OSError as e:
        log.error('%s: %s', e.filename or args.command, e.strerror or e)
        return 1
    return 0
