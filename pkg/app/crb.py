"""Fisher information and Cramer-Rao bound of the four-projection sensor.

The information is the per-event multinomial form
``F(phi) = sum_k p_k'(phi)^2 / p_k(phi)`` (phi in radians), multiplied by the
number of events ``M`` for the bound ``sigma = 1/sqrt(M F)``.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateModelError, InfiniteInformationError, UnboundedCRBError
from .sensor import probabilities


@dataclass(frozen=True)
class CrbPoint:
    phi_deg: float
    fisher: float
    events: float
    sigma_rad: float

    @property
    def sigma_deg(self):
        return math.degrees(self.sigma_rad)


def fisher_per_event(model, phi_deg):
    """Per-event Fisher information in rad^-2, from the analytic fringe derivative.

    With ``w_k = eta_k (1 + V_k cos x_k)``, ``x_k = 2 phi - delta_k`` and
    ``Z = sum w_k`` this is ``sum_k w_k'^2 / (Z w_k) - (Z'/Z)^2``. A channel at
    an exact null (``V_k = 1``) enters through its limit
    ``4 eta_k (1 - cos x_k)``, which keeps F continuous in phi.
    """
    x = model.fringe_argument(phi_deg)
    eta, vis = model.efficiencies, model.visibilities
    w, z = model.weights(phi_deg)
    if np.any(z <= 0.0):
        raise DegenerateModelError(f'fringe weights vanish at phase {phi_deg}')
    dw = -2.0 * eta * vis * np.sin(x)
    dz = dw.sum(axis=-1)

    denom = 1.0 + vis * np.cos(x)
    ratio = np.where(
        vis == 1.0,
        4.0 * eta * (1.0 - np.cos(x)),
        np.divide(4.0 * eta * vis ** 2 * np.sin(x) ** 2, denom,
                  out=np.zeros_like(x), where=denom > 0),
    )
    fisher = ratio.sum(axis=-1) / z - (dz / z) ** 2
    # rounding leaves values like -1e-17 where the fringes carry no information
    fisher = np.maximum(fisher, 0.0)
    return float(fisher) if np.ndim(fisher) == 0 else fisher


def fisher_from_probabilities(p, dp, atol=1e-12):
    """``sum p'^2 / p`` for given probabilities and derivatives (rad^-1).

    Channels with ``p = 0`` contribute nothing if their derivative is zero
    too; a non-zero derivative there means a deterministic outcome and raises
    :class:`InfiniteInformationError`.
    """
    p = np.asarray(p, dtype=float)
    dp = np.asarray(dp, dtype=float)
    null = p <= 0.0
    if np.any(null & (np.abs(dp) > atol)):
        raise InfiniteInformationError('zero-probability channel with non-zero slope')
    terms = np.divide(dp * dp, p, out=np.zeros_like(p), where=~null)
    return float(terms.sum())


def numeric_fisher(model, phi_deg, step_rad=1e-6):
    """Fisher information with a central-difference ``dp/dphi``."""
    step_deg = math.degrees(step_rad)
    p = probabilities(model, phi_deg)
    dp = (probabilities(model, phi_deg + step_deg)
          - probabilities(model, phi_deg - step_deg)) / (2.0 * step_rad)
    return fisher_from_probabilities(p, dp, atol=1e-6)


def crb_sigma(model, phi_deg, events):
    """Cramer-Rao standard deviation in degrees for ``events`` total events."""
    if events < 1:
        raise ValueError(f'need at least one event, got {events}')
    fisher = fisher_per_event(model, phi_deg)
    if fisher <= 0.0:
        raise UnboundedCRBError(f'no Fisher information at phase {phi_deg:g} deg')
    return math.degrees(1.0 / math.sqrt(events * fisher))


def fm_ratio(measured_variance, model, phi_deg, events):
    """Measured variance (deg^2) over the Cramer-Rao variance at ``events``."""
    return measured_variance / crb_sigma(model, phi_deg, events) ** 2


def crb_curve(model, phases_deg, events):
    """:class:`CrbPoint` per phase; ``sigma_rad`` is infinite where F = 0."""
    points = []
    for phi in phases_deg:
        fisher = fisher_per_event(model, float(phi))
        sigma = 1.0 / math.sqrt(events * fisher) if fisher > 0 else math.inf
        points.append(CrbPoint(float(phi), fisher, events, sigma))
    return points
