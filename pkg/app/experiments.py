"""Studies on simulated or measured calibration data, and their CSV files.

Every study takes a master seed. Sub-tasks draw from seeds derived from it
and their task coordinates (see :mod:`app.rng`), and results are collected in
parameter order, so ``workers > 1`` only changes the wall-clock time.
"""
import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .calibrator import CalibrationRecord, calibrate, check_phase_span, estimate
from .crb import crb_curve, crb_sigma, fm_ratio
from .errors import RecordFormatError, UnboundedCRBError
from .network import Topology, TrainConfig
from .rng import derive_seed, generator
from .sensor import CountVector, simulate_count_array

log = logging.getLogger(__name__)

DEFAULT_TEST_PHASES = (20.8, 45.0, 90.0, 140.0, 168.8)
DEFAULT_EVENT_COUNTS = (1000, 5000, 10000, 40000)
# (exposure in s, fraction of the calibration rate)
DEFAULT_ACQUISITIONS = ((0.5, 1.0), (1.0, 1.0), (4.0, 1.0), (0.5, 0.3))


# ── Calibration records ─────────────────────────────────────────

def record_header(k):
    return ['phase_deg'] + [f'count_{i}' for i in range(1, k + 1)] + ['exposure_s']


def record_csv(record, comments=()):
    """CSV text of ``record``; ``comments`` become leading ``#`` lines."""
    rows = [
        [float(phase)] + counts + [float(exposure)]
        for phase, counts, exposure in zip(record.phases, record.counts.tolist(), record.exposures)
    ]
    return format_csv(record_header(record.k), rows, comments)


def write_record_csv(record, path, comments=()):
    with open(path, 'w', encoding='utf-8', newline='') as fh:
        fh.write(record_csv(record, comments))


def parse_record_csv(lines):
    """Parse record CSV lines; blank lines and ``#`` comments are skipped."""
    header = None
    phases, counts, exposures = [], [], []
    for number, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith('#'):
            continue
        fields = [part.strip() for part in next(csv.reader([text]))]
        if header is None:
            k = len(fields) - 2
            if k < 1 or fields != record_header(k):
                raise RecordFormatError(
                    'expected header phase_deg,count_1,...,count_K,exposure_s', number)
            header = fields
            continue
        if len(fields) != len(header):
            raise RecordFormatError(f'expected {len(header)} fields, got {len(fields)}', number)
        try:
            phase = float(fields[0])
            exposure = float(fields[-1])
        except ValueError as exc:
            raise RecordFormatError(f'bad number: {exc}', number) from exc
        row = []
        for value in fields[1:-1]:
            try:
                count = int(value)
            except ValueError:
                raise RecordFormatError(f'count {value!r} is not an integer', number) from None
            if count < 0:
                raise RecordFormatError(f'negative count {count}', number)
            row.append(count)
        if not math.isfinite(phase):
            raise RecordFormatError(f'phase {fields[0]!r} is not finite', number)
        if not exposure > 0:
            raise RecordFormatError(f'exposure must be positive, got {fields[-1]!r}', number)
        if phases and phase <= phases[-1]:
            raise RecordFormatError(
                f'phase {phase:g} does not increase after {phases[-1]:g}', number)
        phases.append(phase)
        counts.append(row)
        exposures.append(exposure)
    if header is None:
        raise RecordFormatError('file is empty or has no header')
    if not phases:
        raise RecordFormatError('file has a header but no data rows')
    return CalibrationRecord(np.array(phases), np.array(counts, dtype=np.int64),
                             np.array(exposures))


def load_record_csv(path):
    with open(path, encoding='utf-8') as fh:
        return parse_record_csv(fh)


def calibration_phases(step_deg=1.0, phase_min=0.0, phase_max=180.0):
    """Grid ``phase_min, phase_min + step, ...`` strictly below ``phase_max``."""
    count = int(math.ceil((phase_max - phase_min) / step_deg - 1e-9))
    return phase_min + step_deg * np.arange(count)


def simulate_record(model, step_deg=1.0, exposure=1.0, seed=0, phase_min=0.0, phase_max=180.0):
    """Simulated calibration scan; entry ``i`` draws from ``generator(seed, i)``."""
    phases = calibration_phases(step_deg, phase_min, phase_max)
    check_phase_span(phases)
    counts = np.vstack([
        simulate_count_array(model, phi, exposure, 1, generator(seed, i))
        for i, phi in enumerate(phases)
    ])
    return CalibrationRecord(phases, counts, np.full(phases.shape, float(exposure)), step_deg)


# ── Study settings ──────────────────────────────────────────────

def default_eval_phases(count=30, phase_min=0.0, phase_max=180.0):
    """``count`` evenly spaced phases strictly inside ``(phase_min, phase_max)``."""
    return tuple(np.linspace(phase_min, phase_max, count + 2)[1:-1].tolist())


@dataclass(frozen=True)
class StudySettings:
    hidden_sizes: tuple = (30,)
    train: TrainConfig = field(default_factory=TrainConfig)
    n_b: int = 50
    step_deg: float = 1.0
    phase_min: float = 0.0
    phase_max: float = 180.0
    exposure: float = 1.0
    repetitions: int = 100
    eval_events: float = 10000
    eval_phases: tuple = field(default_factory=default_eval_phases)
    workers: int = 1

    @classmethod
    def from_config(cls, config):
        return cls(
            hidden_sizes=tuple(config.HIDDEN_SIZES),
            train=TrainConfig.from_config(config),
            n_b=config.N_B,
            step_deg=config.STEP_DEG,
            phase_min=config.PHASE_MIN_DEG,
            phase_max=config.PHASE_MAX_DEG,
            exposure=config.EXPOSURE_S,
            repetitions=config.REPETITIONS,
            eval_events=config.EVAL_EVENTS,
            eval_phases=default_eval_phases(config.EVAL_PHASES, config.PHASE_MIN_DEG,
                                            config.PHASE_MAX_DEG),
            workers=config.WORKERS,
        )

    def topology(self, k, hidden_sizes=None):
        return Topology(k, tuple(hidden_sizes or self.hidden_sizes))


def _ordered_map(func, items, workers):
    """``map`` in input order, on a thread pool when ``workers > 1``."""
    if workers <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


# ── Error evaluation ────────────────────────────────────────────

@dataclass(frozen=True)
class ErrorEvaluation:
    phases: tuple
    repetitions: int
    events: float
    per_phase_std: tuple
    per_phase_mean: tuple
    eps: float


def simulate_acquisitions(model, phi_deg, events, repetitions, seed, index):
    """``repetitions`` acquisitions of ``events`` mean total counts at one phase."""
    return simulate_count_array(model, phi_deg, events / model.rate, repetitions,
                                generator(seed, index))


def _spread(values):
    values = np.asarray(values, dtype=float)
    return float(np.std(values, ddof=1)) if values.size > 1 else 0.0


def evaluate_error(estimator, model, phases, repetitions=100, events=10000, seed=0):
    """Mean over ``phases`` of the estimate spread over repeated acquisitions.

    ``estimator`` needs ``point_estimates(counts)`` for an ``(R, K)`` array.
    Acquisitions at phase ``j`` come from ``generator(seed, j)``.
    """
    lo = getattr(estimator, 'phase_min', -math.inf)
    hi = getattr(estimator, 'phase_max', math.inf)
    stds, means = [], []
    for j, phi in enumerate(phases):
        if not lo <= phi <= hi:
            raise ValueError(f'test phase {phi:g} outside the calibrated domain [{lo:g}, {hi:g}]')
        counts = simulate_acquisitions(model, phi, events, repetitions, seed, j)
        estimates = np.asarray(estimator.point_estimates(counts), dtype=float)
        stds.append(_spread(estimates))
        means.append(float(estimates.mean()))
    return ErrorEvaluation(
        phases=tuple(float(p) for p in phases),
        repetitions=repetitions,
        events=events,
        per_phase_std=tuple(stds),
        per_phase_mean=tuple(means),
        eps=float(np.mean(stds)),
    )


# ── Training-parameter sweeps ───────────────────────────────────

@dataclass(frozen=True)
class SweepResult:
    parameter: str
    values: tuple
    eps: tuple
    eps_err: tuple
    n_trainings: int
    events: float
    crb_deg: float = None

    def rows(self):
        return list(zip(self.values, self.eps, self.eps_err,
                        [self.n_trainings] * len(self.values)))


def _crb_reference(model, phases, events):
    try:
        return float(np.mean([crb_sigma(model, phi, events) for phi in phases]))
    except UnboundedCRBError:
        return None


def _sweep(parameter, labels, configure, model, n_trainings, settings, seed, record):
    """Shared driver: ``configure(i)`` gives ``(hidden_sizes, n_b)`` for value ``i``."""
    if n_trainings < 2:
        raise ValueError(f'need at least 2 trainings per point, got {n_trainings}')
    if record is None:
        record = simulate_record(model, settings.step_deg, settings.exposure,
                                 derive_seed(seed, 0), settings.phase_min, settings.phase_max)
    eval_seed = derive_seed(seed, 2)

    def run(task):
        index, trial = task
        hidden, n_b = configure(index)
        estimator = calibrate(record, settings.topology(record.k, hidden), settings.train,
                              n_b, derive_seed(seed, 1, index, trial))
        result = evaluate_error(estimator, model, settings.eval_phases, settings.repetitions,
                                settings.eval_events, eval_seed)
        return result.eps

    tasks = [(i, t) for i in range(len(labels)) for t in range(n_trainings)]
    eps = np.array(_ordered_map(run, tasks, settings.workers)).reshape(len(labels), n_trainings)
    for label, row in zip(labels, eps):
        log.info('%s = %s: eps %.4f +- %.4f deg', parameter, label, row.mean(), _spread(row))
    return SweepResult(
        parameter=parameter,
        values=tuple(labels),
        eps=tuple(float(row.mean()) for row in eps),
        eps_err=tuple(_spread(row) for row in eps),
        n_trainings=n_trainings,
        events=settings.eval_events,
        crb_deg=_crb_reference(model, settings.eval_phases, settings.eval_events),
    )


def sweep_neurons(model, hidden_layouts, n_trainings=35, settings=None, seed=0, record=None):
    """Estimation error against hidden-layer layout (``30``, ``'20x10'``, ...)."""
    settings = settings or StudySettings()
    layouts = [Topology.parse(1, h).hidden_sizes if not isinstance(h, (tuple, list))
               else tuple(h) for h in hidden_layouts]
    labels = ['x'.join(str(n) for n in layout) for layout in layouts]
    return _sweep('n_n', labels, lambda i: (layouts[i], settings.n_b),
                  model, n_trainings, settings, seed, record)


def sweep_bootstrap(model, n_b_values, n_trainings=35, settings=None, seed=0, record=None):
    """Estimation error against bootstrap replicas per phase at fixed topology."""
    settings = settings or StudySettings()
    values = [int(v) for v in n_b_values]
    return _sweep('n_b', [str(v) for v in values],
                  lambda i: (settings.hidden_sizes, values[i]),
                  model, n_trainings, settings, seed, record)


# ── CRB comparison ──────────────────────────────────────────────

@dataclass(frozen=True)
class UncertaintyRow:
    phi_deg: float
    events: float
    std_deg: float
    crb_deg: float
    median_delta_deg: float
    fm: float


@dataclass(frozen=True)
class FmTable:
    step_deg: float
    rows: tuple
    detail: tuple
    stop_reason: str = ''


def acquisition_events(model, acquisitions=DEFAULT_ACQUISITIONS):
    """Mean total events for ``(exposure, rate fraction)`` acquisitions."""
    return [model.rate * fraction * exposure for exposure, fraction in acquisitions]


def _median_bootstrap_delta(estimator, counts, n_b, seed):
    deltas = [
        estimate(estimator, CountVector(tuple(row)), n_b, derive_seed(seed, r)).delta_phi_deg
        for r, row in enumerate(counts.tolist())
    ]
    return float(np.median(deltas))


def fm_table(model, step_deg=2.0, event_counts=DEFAULT_EVENT_COUNTS, phases=DEFAULT_TEST_PHASES,
             settings=None, seed=0, record=None):
    """Variance-to-CRB ratio ``F_M`` per event count after one calibration.

    ``F_M`` is the phase-averaged measured variance over the phase-averaged
    Cramer-Rao variance. The detail rows give, per phase and ``M``, the spread
    over repeated acquisitions next to the median bootstrap uncertainty.
    """
    settings = replace(settings or StudySettings(), step_deg=step_deg)
    if record is None:
        record = simulate_record(model, step_deg, settings.exposure, derive_seed(seed, 0),
                                 settings.phase_min, settings.phase_max)
    estimator = calibrate(record, settings.topology(record.k), settings.train,
                          settings.n_b, derive_seed(seed, 1))

    rows, detail = [], []
    for m_index, events in enumerate(event_counts):
        eval_seed = derive_seed(seed, 2, m_index)
        evaluation = evaluate_error(estimator, model, phases, settings.repetitions,
                                    events, eval_seed)
        crbs = [crb_sigma(model, phi, events) for phi in phases]
        variance = float(np.mean(np.square(evaluation.per_phase_std)))
        crb_variance = float(np.mean(np.square(crbs)))
        rows.append((events, variance / crb_variance, variance, crb_variance))
        for j, (phi, std, crb) in enumerate(zip(phases, evaluation.per_phase_std, crbs)):
            counts = simulate_acquisitions(model, phi, events, settings.repetitions, eval_seed, j)
            delta = _median_bootstrap_delta(estimator, counts, settings.n_b,
                                            derive_seed(seed, 3, m_index, j))
            detail.append(UncertaintyRow(float(phi), events, std, crb, delta,
                                         fm_ratio(std ** 2, model, phi, events)))
        log.info('M = %g: F_M = %.3f', events, rows[-1][1])
    return FmTable(step_deg, tuple(rows), tuple(detail), estimator.history.stop_reason)


def uncertainty_scaling(estimator, model, phi_deg, event_counts, trials=100, n_b=50, seed=0):
    """Median bootstrap uncertainty per ``M`` and its log-log slope against ``M``."""
    medians = []
    for m_index, events in enumerate(event_counts):
        counts = simulate_acquisitions(model, phi_deg, events, trials, seed, m_index)
        medians.append(_median_bootstrap_delta(estimator, counts, n_b,
                                               derive_seed(seed, 1, m_index)))
    slope = float(np.polyfit(np.log(event_counts), np.log(medians), 1)[0])
    return medians, slope


# ── CSV output ──────────────────────────────────────────────────

def format_comments(items):
    """``# KEY = value`` lines for ``(key, value)`` pairs."""
    return ''.join(f'# {key} = {value}\n' for key, value in items)


def format_csv(header, rows, comments=()):
    out = io.StringIO()
    out.write(format_comments(comments))
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(header)
    writer.writerows([_cell(v) for v in row] for row in rows)
    return out.getvalue()


def _cell(value):
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def sweep_csv(result, comments=()):
    extra = [('events', result.events)]
    if result.crb_deg is not None:
        extra.append(('crb_deg', result.crb_deg))
    return format_csv(['param', 'eps_deg', 'eps_err_deg', 'n_trainings'],
                      result.rows(), list(comments) + extra)


def crb_csv(model, phases, events, comments=()):
    rows = [(p.phi_deg, p.fisher, p.sigma_deg, p.events) for p in crb_curve(model, phases, events)]
    return format_csv(['phase_deg', 'fisher_rad2', 'sigma_deg', 'M'], rows, comments)


def estimate_csv(result, comments=()):
    return format_csv(['phi_hat_deg', 'delta_phi_deg', 'n_b', 'flag_clamped'],
                      [(result.phi_deg, result.delta_phi_deg, result.n_b, result.clamped)],
                      comments)


def evaluation_csv(evaluation, comments=()):
    rows = zip(evaluation.phases, evaluation.per_phase_std, evaluation.per_phase_mean)
    extra = [('events', evaluation.events), ('repetitions', evaluation.repetitions),
             ('eps_deg', evaluation.eps)]
    return format_csv(['phase_deg', 'std_deg', 'mean_deg'], rows, list(comments) + extra)


def fm_csv(table, comments=()):
    return format_csv(['M', 'F_M', 'variance_deg2', 'crb_variance_deg2'], table.rows,
                      list(comments) + [('step_deg', table.step_deg)])


def fm_detail_csv(table, comments=()):
    rows = [(r.phi_deg, r.events, r.std_deg, r.crb_deg, r.median_delta_deg, r.fm)
            for r in table.detail]
    return format_csv(['phase_deg', 'M', 'std_deg', 'crb_sigma_deg', 'median_delta_phi_deg',
                       'F_M'], rows, comments)


def scaling_csv(phi_deg, event_counts, medians, slope, comments=()):
    extra = [('phase_deg', phi_deg), ('slope', slope)]
    return format_csv(['M', 'median_delta_phi_deg'], zip(event_counts, medians),
                      list(comments) + extra)
