"""Forward model of the two-photon phase sensor.

Each projection ``k`` sees a super-resolving fringe

    w_k(phi) = eta_k * (1 + V_k * cos(2*phi - delta_k))

and the probabilities are the weights normalised across channels. Angles are
degrees at every public interface.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateModelError, ModelError, ShapeError
from .rng import generator

DEFAULT_OFFSETS_DEG = (0.0, 90.0, 180.0, 270.0)
DEFAULT_VISIBILITY = 0.93
DEFAULT_RATE = 10000.0


def hwp_to_phase(chi):
    """Phase imprinted by the test half-wave plate at angle ``chi`` (degrees)."""
    return 4.0 * chi


@dataclass(frozen=True)
class ProjectionSetting:
    """One polarisation projection: fringe offset, contrast and efficiency."""

    offset_deg: float
    visibility: float = 1.0
    efficiency: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.offset_deg):
            raise ModelError(f'offset must be finite, got {self.offset_deg}')
        if not 0.0 <= self.visibility <= 1.0:
            raise ModelError(f'visibility must lie in [0, 1], got {self.visibility}')
        if not self.efficiency > 0.0:
            raise ModelError(f'efficiency must be positive, got {self.efficiency}')


@dataclass(frozen=True)
class SensorModel:
    """Ordered projections plus the mean total event rate (counts/s)."""

    projections: tuple
    rate: float = DEFAULT_RATE
    _params: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        projections = tuple(self.projections)
        object.__setattr__(self, 'projections', projections)
        if len(projections) < 3:
            raise ModelError(f'need at least 3 projections, got {len(projections)}')
        if not self.rate > 0.0:
            raise ModelError(f'rate must be positive, got {self.rate}')
        offsets = np.radians([p.offset_deg for p in projections])
        vis = np.array([p.visibility for p in projections], dtype=float)
        eff = np.array([p.efficiency for p in projections], dtype=float)
        for arr in (offsets, vis, eff):
            arr.setflags(write=False)
        object.__setattr__(self, '_params', (offsets, vis, eff))

    @classmethod
    def create(cls, offsets_deg=DEFAULT_OFFSETS_DEG, visibility=DEFAULT_VISIBILITY,
               efficiency=1.0, rate=DEFAULT_RATE):
        """Build a model; scalar visibility/efficiency apply to every channel."""
        k = len(offsets_deg)
        vis = np.broadcast_to(np.asarray(visibility, dtype=float), (k,))
        eff = np.broadcast_to(np.asarray(efficiency, dtype=float), (k,))
        projections = tuple(
            ProjectionSetting(float(d), float(v), float(e))
            for d, v, e in zip(offsets_deg, vis, eff)
        )
        return cls(projections, float(rate))

    @classmethod
    def from_config(cls, config):
        """Model described by a :class:`config.Config`."""
        offsets = tuple(config.OFFSETS_DEG)
        if len(offsets) != config.PROJECTIONS:
            raise ModelError(
                f'PROJECTIONS = {config.PROJECTIONS} but {len(offsets)} offsets given'
            )

        def per_channel(values, name):
            values = tuple(values)
            if len(values) == 1:
                return values[0]
            if len(values) != len(offsets):
                raise ModelError(f'{name} needs 1 or {len(offsets)} values, got {len(values)}')
            return values

        return cls.create(
            offsets,
            visibility=per_channel(config.VISIBILITY, 'VISIBILITY'),
            efficiency=per_channel(config.EFFICIENCY, 'EFFICIENCY'),
            rate=config.RATE,
        )

    @property
    def k(self):
        return len(self.projections)

    @property
    def offsets(self):
        """Offsets in radians."""
        return self._params[0]

    @property
    def visibilities(self):
        return self._params[1]

    @property
    def efficiencies(self):
        return self._params[2]

    def fringe_argument(self, phi_deg):
        """``2*phi - delta_k`` in radians, shape ``phi.shape + (K,)``."""
        phi = np.radians(np.asarray(phi_deg, dtype=float))
        return 2.0 * phi[..., None] - self.offsets

    def weights(self, phi_deg):
        """Unnormalised channel weights and the normaliser ``Z``."""
        x = self.fringe_argument(phi_deg)
        w = self.efficiencies * (1.0 + self.visibilities * np.cos(x))
        z = w.sum(axis=-1)
        return w, z


@dataclass(frozen=True)
class CountVector:
    """Coincidence counts, one per projection, for one acquisition."""

    counts: tuple
    exposure: float = 1.0

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise ModelError(f'counts must be non-negative, got {counts}')
        if not self.exposure > 0.0:
            raise ModelError(f'exposure must be positive, got {self.exposure}')
        object.__setattr__(self, 'counts', counts)

    def __len__(self):
        return len(self.counts)

    @property
    def total(self):
        return sum(self.counts)

    def as_array(self):
        return np.array(self.counts, dtype=np.int64)

    def scaled(self, factor):
        """Counts multiplied by a positive integer factor."""
        return CountVector(tuple(factor * c for c in self.counts), self.exposure)


def probabilities(model, phi_deg):
    """Projection probabilities at ``phi_deg`` (scalar or array of phases).

    Returns shape ``(K,)`` for a scalar phase, ``phi.shape + (K,)`` otherwise.
    """
    w, z = model.weights(phi_deg)
    if np.any(z <= 0.0):
        raise DegenerateModelError(f'fringe weights vanish at phase {phi_deg}')
    return w / z[..., None]


def simulate_counts(model, phi_deg, exposure, seed):
    """Independent Poisson counts per projection with mean ``R*exposure*p_k``."""
    if not exposure > 0.0:
        raise ModelError(f'exposure must be positive, got {exposure}')
    mean = model.rate * exposure * probabilities(model, float(phi_deg))
    counts = generator(seed).poisson(mean)
    return CountVector(tuple(counts.tolist()), float(exposure))


def simulate_count_array(model, phi_deg, exposure, size, rng):
    """``size`` independent acquisitions at one phase as a ``(size, K)`` array."""
    if not exposure > 0.0:
        raise ModelError(f'exposure must be positive, got {exposure}')
    mean = model.rate * exposure * probabilities(model, float(phi_deg))
    return rng.poisson(mean, size=(size, model.k))


def check_counts(model, counts):
    """Raise :class:`ShapeError` when ``counts`` does not fit ``model``.

    ``model`` is anything with a projection count ``k``, a sensor model or a
    trained estimator.
    """
    if len(counts) != model.k:
        raise ShapeError(f'expected {model.k} counts, got {len(counts)}')
