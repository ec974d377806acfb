"""Poisson bootstrap of coincidence counts and conversion to frequencies."""
import logging

import numpy as np

from .errors import EmptyDataError
from .rng import generator
from .sensor import CountVector

log = logging.getLogger(__name__)


def resample_replicas(counts, n_b, seed):
    """``n_b`` fictitious repetitions of ``counts``.

    Channel ``k`` of every replica is an independent Poisson draw with mean
    ``counts[k]``; zero channels stay zero.
    """
    if n_b < 1:
        raise ValueError(f'n_b must be at least 1, got {n_b}')
    draws = resample_array(counts.as_array(), n_b, generator(seed))
    return [CountVector(tuple(row), counts.exposure) for row in draws.tolist()]


def resample_array(counts, n_b, rng):
    """Replica counts as an ``(n_b, K)`` integer array."""
    counts = np.asarray(counts)
    return rng.poisson(counts.astype(float), size=(n_b, counts.shape[-1]))


def resample_nonempty(counts, n_b, rng):
    """Like :func:`resample_array` but redraws all-zero replicas.

    A replica with no counts has no frequency vector. Redrawing keeps the
    replica count at ``n_b``; it only triggers for sources with a handful of
    counts.
    """
    counts = np.asarray(counts)
    if counts.sum() <= 0:
        raise EmptyDataError('cannot resample an acquisition with no counts')
    draws = resample_array(counts, n_b, rng)
    empty = draws.sum(axis=1) == 0
    if empty.any():
        log.warning('Redrawing %d empty bootstrap replicas (source total %d)',
                    int(empty.sum()), int(counts.sum()))
    while empty.any():
        draws[empty] = resample_array(counts, int(empty.sum()), rng)
        empty = draws.sum(axis=1) == 0
    return draws


def to_frequencies(counts):
    """Relative frequencies ``counts_k / sum(counts)`` as a float array.

    Accepts a :class:`CountVector`, a sequence, or an ``(N, K)`` array of
    acquisitions (normalised row by row).
    """
    if isinstance(counts, CountVector):
        counts = counts.counts
    arr = np.asarray(counts, dtype=np.int64)
    totals = arr.sum(axis=-1, keepdims=True)
    if np.any(totals <= 0):
        raise EmptyDataError('all-zero counts: the acquisition is unusable')
    # integer totals keep the result identical for any integer rescaling
    return arr / totals
