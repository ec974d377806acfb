"""Calibration pipeline: bootstrap-augmented training and phase estimation.

Training: every ``(phase, counts)`` pair of a calibration record is expanded
into ``n_b`` Poisson replicas, each converted to relative frequencies and
labelled with the phase. Estimation: the trained network maps the measured
frequencies to a phase, and the spread of its outputs over Poisson replicas
of the same counts gives the uncertainty.
"""
import hashlib
import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .bootstrap import resample_nonempty, to_frequencies
from .errors import EmptyDataError, FormatVersionError, ModelError, ShapeError
from .network import Dataset, TrainConfig, dump_network, load_network, train
from .rng import derive_seed, generator
from .sensor import CountVector, check_counts

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
# fringes repeat every 180 deg, so phi and phi + 180 give the same frequencies
FRINGE_PERIOD_DEG = 180.0


def check_phase_span(phases):
    """Raise :class:`ModelError` if ``phases`` cover a full fringe period."""
    span = float(phases[-1] - phases[0]) if len(phases) else 0.0
    if span >= FRINGE_PERIOD_DEG:
        raise ModelError(
            f'calibration phases span {span:g} deg; they must stay within one '
            f'{FRINGE_PERIOD_DEG:g} deg fringe period')


@dataclass(frozen=True, eq=False)
class CalibrationRecord:
    """Known phases (degrees, strictly increasing, spanning less than one
    fringe period) with their count vectors."""

    phases: np.ndarray
    counts: np.ndarray
    exposures: np.ndarray
    step_deg: float = None

    def __post_init__(self):
        phases = np.asarray(self.phases, dtype=float).reshape(-1)
        counts = np.asarray(self.counts, dtype=np.int64)
        exposures = np.broadcast_to(np.asarray(self.exposures, dtype=float), phases.shape).copy()
        if phases.size == 0:
            raise ModelError('calibration record is empty')
        if counts.ndim != 2 or counts.shape[0] != phases.size:
            raise ShapeError(f'counts shape {counts.shape} does not match {phases.size} phases')
        if not np.all(np.isfinite(phases)) or np.any(np.diff(phases) <= 0):
            raise ModelError('record phases must be finite and strictly increasing')
        check_phase_span(phases)
        if np.any(counts < 0):
            raise ModelError('record counts must be non-negative')
        if np.any(exposures <= 0):
            raise ModelError('record exposures must be positive')
        step = self.step_deg
        if step is None and phases.size > 1:
            step = float(np.median(np.diff(phases)))
        for name, value in (('phases', phases), ('counts', counts), ('exposures', exposures)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, 'step_deg', step)

    @classmethod
    def from_entries(cls, entries, step_deg=None):
        """Record from ``(phase, CountVector)`` pairs."""
        entries = list(entries)
        if not entries:
            raise ModelError('calibration record is empty')
        sizes = {len(c) for _, c in entries}
        if len(sizes) != 1:
            raise ShapeError(f'count vectors differ in length: {sorted(sizes)}')
        return cls(
            np.array([p for p, _ in entries], dtype=float),
            np.array([c.counts for _, c in entries], dtype=np.int64),
            np.array([c.exposure for _, c in entries], dtype=float),
            step_deg,
        )

    def __len__(self):
        return self.phases.size

    @property
    def k(self):
        return self.counts.shape[1]

    def entries(self):
        return [
            (float(p), CountVector(tuple(c), float(e)))
            for p, c, e in zip(self.phases, self.counts.tolist(), self.exposures)
        ]

    def __eq__(self, other):
        return (isinstance(other, CalibrationRecord)
                and np.array_equal(self.phases, other.phases)
                and np.array_equal(self.counts, other.counts)
                and np.array_equal(self.exposures, other.exposures))

    def sha256(self):
        """Digest of the record contents, used as estimator provenance."""
        digest = hashlib.sha256()
        for p, c, e in zip(self.phases, self.counts.tolist(), self.exposures):
            digest.update(f'{float(p)!r},{",".join(map(str, c))},{float(e)!r}\n'.encode('ascii'))
        return digest.hexdigest()


@dataclass(frozen=True)
class Estimate:
    """Phase estimate in degrees with its bootstrap standard deviation."""

    phi_deg: float
    delta_phi_deg: float
    n_b: int
    clamped: bool = False
    raw_phi_deg: float = None
    replicas: tuple = None


@dataclass(frozen=True, eq=False)
class TrainedEstimator:
    network: object
    phase_min: float
    phase_max: float
    k: int
    provenance: dict = field(default_factory=dict, compare=False)
    history: object = field(default=None, compare=False, repr=False)

    def clamp(self, phi):
        """Clip phases to the calibrated domain; also return the clipped mask."""
        phi = np.asarray(phi, dtype=float)
        clipped = np.clip(phi, self.phase_min, self.phase_max)
        return clipped, clipped != phi

    def point_estimates(self, counts):
        """Clamped phase estimates for an ``(R, K)`` array of acquisitions."""
        counts = np.asarray(counts)
        if counts.shape[-1] != self.k:
            raise ShapeError(f'estimator expects {self.k} counts, got {counts.shape[-1]}')
        phi, _ = self.clamp(self.network.predict(to_frequencies(counts)))
        return phi

    def point_estimate(self, counts):
        return float(self.point_estimates(np.asarray(counts.counts)[None, :])[0])


def build_training_set(record, n_b, seed):
    """``n_b`` Poisson replicas of every record entry, as frequencies -> phase.

    Replicas for entry ``i`` come from ``generator(seed, i)``.
    """
    if n_b < 1:
        raise ValueError(f'n_b must be at least 1, got {n_b}')
    inputs = np.empty((len(record) * n_b, record.k))
    targets = np.repeat(record.phases, n_b)
    for i, (phase, counts) in enumerate(zip(record.phases, record.counts)):
        if counts.sum() == 0:
            raise EmptyDataError('calibration entry has no counts', phase=float(phase))
        replicas = resample_nonempty(counts, n_b, generator(seed, i))
        inputs[i * n_b:(i + 1) * n_b] = to_frequencies(replicas)
    return Dataset(inputs, targets)


def calibrate(record, topology, train_config=None, n_b=50, seed=0):
    """Train an estimator on ``record``; its domain is the record's phase range."""
    train_config = train_config or TrainConfig()
    if topology.input_dim != record.k:
        raise ShapeError(f'topology expects {topology.input_dim} inputs, record has {record.k}')
    log.info('Calibrating %s on %d phases x %d replicas (seed %d)',
             topology.label, len(record), n_b, seed)
    data = build_training_set(record, n_b, derive_seed(seed, 0))
    config = replace(train_config, seed=derive_seed(seed, 1))
    network, history = train(data, topology, config)
    provenance = {
        'record_sha256': record.sha256(),
        'seed': int(seed),
        'n_b': int(n_b),
        'topology': topology.label,
        'stop_reason': history.stop_reason,
        'best_epoch': history.best_epoch,
        **{f'train.{key}': value for key, value in asdict(train_config).items() if key != 'seed'},
    }
    return TrainedEstimator(
        network,
        float(record.phases[0]),
        float(record.phases[-1]),
        record.k,
        provenance,
        history,
    )


def estimate(estimator, counts, n_b=50, seed=0, keep_replicas=False):
    """Phase of ``counts`` with its Poisson-bootstrap uncertainty.

    The point estimate uses the measured frequencies directly; the ``n_b``
    replicas only feed the standard deviation.
    """
    check_counts(estimator, counts)
    if n_b < 1:
        raise ValueError(f'n_b must be at least 1, got {n_b}')
    raw = estimator.network.predict(to_frequencies(counts))
    phi, clamped = estimator.clamp(raw)
    if clamped:
        log.warning('Estimate %.3f deg outside [%g, %g], clamped',
                    raw, estimator.phase_min, estimator.phase_max)

    replicas = resample_nonempty(counts.as_array(), n_b, generator(seed))
    outputs = np.atleast_1d(estimator.network.predict(to_frequencies(replicas)))
    delta = float(np.std(outputs, ddof=1)) if n_b > 1 else 0.0
    return Estimate(
        phi_deg=float(phi),
        delta_phi_deg=delta,
        n_b=n_b,
        clamped=bool(clamped),
        raw_phi_deg=float(raw),
        replicas=tuple(outputs.tolist()) if keep_replicas else None,
    )


# ── Persistence ─────────────────────────────────────────────────

def dump_estimator(estimator):
    lines = [
        f'estimator {FORMAT_VERSION}',
        f'projections {estimator.k}',
        '%s %.17g %.17g' % ('phase_domain', estimator.phase_min, estimator.phase_max),
    ]
    for key, value in estimator.provenance.items():
        lines.append(f'provenance {key} {value}')
    lines.extend(dump_network(estimator.network))
    return '\n'.join(lines) + '\n'


def save_estimator(estimator, path):
    with open(path, 'w', encoding='utf-8') as fh:
        fh.write(dump_estimator(estimator))
    log.info('Estimator saved to %s', path)


def parse_estimator(text):
    lines = [line.strip() for line in text.splitlines()]
    lines = [line for line in lines if line and not line.startswith('#')]
    if not lines or lines[0] != f'estimator {FORMAT_VERSION}':
        raise FormatVersionError(f'unsupported estimator header {lines[:1]}')
    k = None
    domain = None
    provenance = {}
    index = 1
    while index < len(lines) and not lines[index].startswith('network '):
        head, _, rest = lines[index].partition(' ')
        if head == 'projections':
            k = int(rest)
        elif head == 'phase_domain':
            lo, hi = (float(v) for v in rest.split())
            domain = (lo, hi)
        elif head == 'provenance':
            key, _, value = rest.partition(' ')
            provenance[key] = value
        else:
            raise FormatVersionError(f'unknown estimator field {head!r}')
        index += 1
    if k is None or domain is None:
        raise FormatVersionError('estimator header lacks projections or phase_domain')
    network = load_network(lines[index:])
    return TrainedEstimator(network, domain[0], domain[1], k, provenance)


def load_estimator(path):
    with open(path, encoding='utf-8') as fh:
        return parse_estimator(fh.read())
