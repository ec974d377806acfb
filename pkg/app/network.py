"""Feed-forward regression network trained by Levenberg-Marquardt.

Hidden layers use the symmetric sigmoid ``2/(1+exp(-2x)) - 1`` (numerically
``tanh``), the output layer is affine. Training is full batch: one Jacobian of
the residuals over the whole training split per epoch, damped Gauss-Newton
steps until one lowers the training MSE, and early stopping on the
validation split.

Parameters are flattened layer by layer, each layer as its weight matrix in
row-major order followed by its bias vector. The same order is used by the
Jacobian columns and by the text format.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import DatasetSizeError, FormatVersionError, ShapeError
from .rng import generator

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
_MU_FLOOR = np.finfo(float).tiny


def _tansig(x):
    return np.tanh(x)


def _tansig_slope(a):
    return 1.0 - a * a


def _identity(x):
    return x


def _identity_slope(a):
    return np.ones_like(a)


# name -> (activation, derivative expressed through the activation output)
ACTIVATIONS = {
    'tansig': (_tansig, _tansig_slope),
    'identity': (_identity, _identity_slope),
}


@dataclass(frozen=True)
class Topology:
    """Layer sizes. ``identity`` activation is a linear test hook and is the
    only case allowed to have no hidden layer."""

    input_dim: int
    hidden_sizes: tuple = (30,)
    output_dim: int = 1
    activation: str = 'tansig'

    def __post_init__(self):
        hidden = tuple(int(h) for h in self.hidden_sizes)
        object.__setattr__(self, 'hidden_sizes', hidden)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f'unknown activation {self.activation!r}')
        if self.input_dim < 1 or any(h < 1 for h in hidden):
            raise ValueError(f'layer sizes must be positive: {self.layer_sizes}')
        if not hidden and self.activation != 'identity':
            raise ValueError('at least one hidden layer is required')
        if self.output_dim != 1:
            raise ValueError('only scalar regression is supported')

    @classmethod
    def parse(cls, input_dim, text, activation='tansig'):
        """Topology from a hidden-layer label such as ``'30'`` or ``'20x10'``."""
        sizes = tuple(int(part) for part in str(text).lower().split('x') if part)
        return cls(input_dim, sizes, activation=activation)

    @property
    def label(self):
        return 'x'.join(str(h) for h in self.hidden_sizes) or 'linear'

    @property
    def layer_sizes(self):
        return (self.input_dim,) + self.hidden_sizes + (self.output_dim,)

    @property
    def n_params(self):
        sizes = self.layer_sizes
        return sum((n_in + 1) * n_out for n_in, n_out in zip(sizes[:-1], sizes[1:]))


@dataclass(frozen=True, eq=False)
class NetworkWeights:
    """Per-layer weight matrices ``(out, in)`` and bias vectors."""

    topology: Topology
    weights: tuple
    biases: tuple

    def __post_init__(self):
        sizes = self.topology.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ShapeError(f'expected {len(sizes) - 1} layers for {sizes}')
        for n_in, n_out, w, b in zip(sizes[:-1], sizes[1:], self.weights, self.biases):
            if w.shape != (n_out, n_in) or b.shape != (n_out,):
                raise ShapeError(f'layer shapes {w.shape}, {b.shape} do not match {sizes}')

    def flat(self):
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def with_flat(self, vector):
        """Same topology with parameters taken from ``vector``."""
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (self.topology.n_params,):
            raise ShapeError(f'expected {self.topology.n_params} parameters, got {vector.shape}')
        weights, biases = [], []
        pos = 0
        sizes = self.topology.layer_sizes
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            weights.append(vector[pos:pos + n_out * n_in].reshape(n_out, n_in).copy())
            pos += n_out * n_in
            biases.append(vector[pos:pos + n_out].copy())
            pos += n_out
        return NetworkWeights(self.topology, tuple(weights), tuple(biases))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Supervised samples: ``inputs`` ``(N, D)`` and scalar ``targets`` ``(N,)``."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        targets = np.asarray(self.targets, dtype=float).reshape(-1)
        if inputs.shape[0] == 0:
            raise DatasetSizeError('dataset is empty')
        if inputs.shape[0] != targets.shape[0]:
            raise ShapeError(f'{inputs.shape[0]} inputs but {targets.shape[0]} targets')
        object.__setattr__(self, 'inputs', inputs)
        object.__setattr__(self, 'targets', targets)

    def __len__(self):
        return self.targets.shape[0]

    @property
    def dim(self):
        return self.inputs.shape[1]

    def subset(self, indices):
        return Dataset(self.inputs[indices], self.targets[indices])


@dataclass(frozen=True)
class TrainConfig:
    fractions: tuple = (0.70, 0.15, 0.15)
    mu0: float = 1e-3
    mu_up: float = 10.0
    mu_down: float = 0.1
    mu_max: float = 1e10
    max_epochs: int = 1000
    patience: int = 6
    min_grad: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        fractions = tuple(float(f) for f in self.fractions)
        object.__setattr__(self, 'fractions', fractions)
        if len(fractions) != 3 or any(f <= 0 for f in fractions):
            raise ValueError(f'need three positive split fractions, got {fractions}')
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise ValueError(f'split fractions must sum to 1, got {sum(fractions)}')
        if not self.mu0 > 0:
            raise ValueError('mu0 must be positive')
        if not self.mu_up > 1 or not 0 < self.mu_down < 1:
            raise ValueError('need mu_up > 1 and 0 < mu_down < 1')
        if self.patience < 1 or self.max_epochs < 1:
            raise ValueError('patience and max_epochs must be at least 1')

    @classmethod
    def from_config(cls, config, seed=None):
        return cls(
            fractions=tuple(config.TRAIN_FRACTIONS),
            mu0=config.MU0,
            mu_up=config.MU_UP,
            mu_down=config.MU_DOWN,
            mu_max=config.MU_MAX,
            max_epochs=config.MAX_EPOCHS,
            patience=config.PATIENCE,
            min_grad=config.MIN_GRAD,
            seed=config.SEED if seed is None else seed,
        )


@dataclass
class TrainingRecord:
    """Per-epoch history. Epoch 0 is the initial network."""

    train_mse: list = field(default_factory=list)
    val_mse: list = field(default_factory=list)
    stop_reason: str = ''
    best_epoch: int = 0
    test_mse: float = math.nan
    test_indices: tuple = ()

    @property
    def best_val_mse(self):
        return self.val_mse[self.best_epoch]

    @property
    def epochs(self):
        return len(self.val_mse) - 1


class Normalizer:
    """Affine map of each coordinate from ``[lo, hi]`` to ``[-1, 1]``.

    A constant coordinate (``lo == hi``) maps to 0.
    """

    def __init__(self, lo, hi):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        self._center = 0.5 * (self.lo + self.hi)
        self._half = 0.5 * (self.hi - self.lo)
        self._scale = np.divide(1.0, self._half, out=np.zeros_like(self._half),
                                where=self._half > 0)

    @classmethod
    def fit(cls, values):
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        return cls(values.min(axis=0), values.max(axis=0))

    def apply(self, x):
        return (np.asarray(x, dtype=float) - self._center) * self._scale

    def invert(self, y):
        return np.asarray(y, dtype=float) * self._half + self._center

    def __eq__(self, other):
        return (isinstance(other, Normalizer)
                and np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi))

    def __repr__(self):
        return f'Normalizer(lo={self.lo.tolist()}, hi={self.hi.tolist()})'


@dataclass(frozen=True, eq=False)
class TrainedNetwork:
    """Weights plus the input/target normalisation they were trained with."""

    weights: NetworkWeights
    input_norm: Normalizer
    target_norm: Normalizer

    def predict(self, inputs):
        """Denormalised output for one input vector or a batch of them."""
        x = np.asarray(inputs, dtype=float)
        out = forward(self.weights, self.input_norm.apply(x))
        result = self.target_norm.invert(np.asarray(out)[..., None])[..., 0]
        return float(result) if x.ndim == 1 else result


class LMStep(NamedTuple):
    weights: NetworkWeights
    accepted: bool
    mu: float
    mse: float
    step: np.ndarray


def split_indices(n, fractions=(0.70, 0.15, 0.15), seed=0):
    """Index arrays of a seeded random training/validation/test split.

    Validation and test get ``floor(fraction * N)`` samples, training the rest.
    """
    _, f_val, f_test = fractions
    # guard the floor against 0.15 * N landing a hair below an integer
    n_val = int(math.floor(f_val * n + 1e-9))
    n_test = int(math.floor(f_test * n + 1e-9))
    if n < 3 or n_val < 1 or n_test < 1 or n - n_val - n_test < 1:
        raise DatasetSizeError(f'{n} samples cannot fill a {fractions} split')
    order = generator(seed).permutation(n)
    train_idx = order[:n - n_val - n_test]
    val_idx = order[n - n_val - n_test:n - n_test]
    test_idx = order[n - n_test:]
    return train_idx, val_idx, test_idx


def split_dataset(data, fractions=(0.70, 0.15, 0.15), seed=0):
    """Seeded random split of ``data`` into training, validation and test sets."""
    return tuple(data.subset(idx) for idx in split_indices(len(data), fractions, seed))


def init_weights(topology, seed=0):
    """Uniform weights in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]``, zero biases."""
    rng = generator(seed)
    sizes = topology.layer_sizes
    weights, biases = [], []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / math.sqrt(n_in)
        weights.append(rng.uniform(-bound, bound, size=(n_out, n_in)))
        biases.append(np.zeros(n_out))
    return NetworkWeights(topology, tuple(weights), tuple(biases))


def _activations(weights, x):
    """Layer outputs ``[x, h_1, ..., h_L, output]`` for a batch ``x``."""
    act, _ = ACTIVATIONS[weights.topology.activation]
    outputs = [x]
    last = len(weights.weights) - 1
    for layer, (w, b) in enumerate(zip(weights.weights, weights.biases)):
        z = outputs[-1] @ w.T + b
        outputs.append(z if layer == last else act(z))
    return outputs


def forward(weights, inputs):
    """Network output for one input vector (float) or an ``(N, D)`` batch."""
    x = np.asarray(inputs, dtype=float)
    if x.shape[-1:] != (weights.topology.input_dim,) or x.ndim > 2:
        raise ShapeError(f'expected inputs of dimension {weights.topology.input_dim}, '
                         f'got shape {x.shape}')
    out = _activations(weights, np.atleast_2d(x))[-1][:, 0]
    return float(out[0]) if x.ndim == 1 else out


def _output_jacobian(weights, x):
    """``d output / d params`` for each sample, and the outputs."""
    _, slope = ACTIVATIONS[weights.topology.activation]
    outputs = _activations(weights, x)
    n = x.shape[0]
    delta = np.ones((n, 1))
    blocks = []
    for layer in range(len(weights.weights) - 1, -1, -1):
        a_prev = outputs[layer]
        grad_w = delta[:, :, None] * a_prev[:, None, :]
        blocks.append(np.concatenate([grad_w.reshape(n, -1), delta], axis=1))
        if layer > 0:
            delta = (delta @ weights.weights[layer]) * slope(outputs[layer])
    blocks.reverse()
    return np.concatenate(blocks, axis=1), outputs[-1][:, 0]


def jacobian(weights, data):
    """``d residual_i / d param_j`` with ``residual = target - output``."""
    grad, _ = _output_jacobian(weights, data.inputs)
    return -grad


def mse(weights, data):
    with np.errstate(over='ignore', invalid='ignore'):
        residual = data.targets - forward(weights, data.inputs)
        return float(np.mean(residual * residual))


def _normal_equations(weights, data):
    """``(J^T J, J^T r, mse)`` for the residual Jacobian ``J``."""
    grad, out = _output_jacobian(weights, data.inputs)
    residual = data.targets - out
    # J = -grad
    return grad.T @ grad, -(grad.T @ residual), float(np.mean(residual * residual))


def lm_step(weights, data, mu, config=None, system=None):
    """One damped Gauss-Newton trial step.

    Solves ``(J^T J + mu I) step = -J^T r``. The candidate is kept only if it
    lowers the training MSE, in which case ``mu`` shrinks by ``mu_down``;
    otherwise the weights are returned unchanged and ``mu`` grows by ``mu_up``.
    ``system`` lets the caller reuse the normal equations across retries.
    """
    if not mu > 0:
        raise ValueError(f'damping must be positive, got {mu}')
    config = config or TrainConfig()
    jtj, jtr, current = system if system is not None else _normal_equations(weights, data)
    n = jtj.shape[0]
    try:
        factor = cho_factor(jtj + mu * np.eye(n), check_finite=True)
        step = cho_solve(factor, -jtr)
    except (LinAlgError, ValueError) as exc:
        log.warning('LM solve failed at mu=%.3g: %s', mu, exc)
        return LMStep(weights, False, mu * config.mu_up, current, np.zeros(n))

    candidate = weights.with_flat(weights.flat() + step)
    trial = mse(candidate, data)
    if np.isfinite(trial) and trial < current:
        return LMStep(candidate, True, max(mu * config.mu_down, _MU_FLOOR), trial, step)
    return LMStep(weights, False, mu * config.mu_up, current, step)


def train(data, topology, config=None):
    """Train on a random split of ``data``; return the best-validation network.

    An epoch computes the Jacobian once and retries the LM step with growing
    damping until one is accepted. Training stops on ``patience`` epochs
    without a validation improvement, ``max_epochs``, a gradient norm below
    ``min_grad``, or damping above ``mu_max``.
    """
    config = config or TrainConfig()
    if data.dim != topology.input_dim:
        raise ShapeError(f'dataset dimension {data.dim} != topology input {topology.input_dim}')
    train_idx, val_idx, test_idx = split_indices(len(data), config.fractions, config.seed)
    train_raw, val_raw, test_raw = (data.subset(i) for i in (train_idx, val_idx, test_idx))

    input_norm = Normalizer.fit(train_raw.inputs)
    target_norm = Normalizer.fit(train_raw.targets)

    def normalise(ds):
        return Dataset(input_norm.apply(ds.inputs), target_norm.apply(ds.targets[:, None])[:, 0])

    train_set, val_set, test_set = normalise(train_raw), normalise(val_raw), normalise(test_raw)

    weights = init_weights(topology, config.seed)
    record = TrainingRecord(test_indices=tuple(int(i) for i in test_idx))
    record.train_mse.append(mse(weights, train_set))
    record.val_mse.append(mse(weights, val_set))
    best_weights = weights
    fails = 0
    mu = config.mu0
    record.stop_reason = 'max_epochs'

    for epoch in range(1, config.max_epochs + 1):
        system = _normal_equations(weights, train_set)
        gradient = 2.0 * float(np.linalg.norm(system[1]))
        if gradient < config.min_grad:
            record.stop_reason = 'min_grad'
            break

        accepted = None
        while mu <= config.mu_max:
            result = lm_step(weights, train_set, mu, config, system=system)
            mu = result.mu
            if result.accepted:
                accepted = result
                break
        if accepted is None:
            record.stop_reason = 'mu_max'
            break

        weights = accepted.weights
        val = mse(weights, val_set)
        record.train_mse.append(accepted.mse)
        record.val_mse.append(val)
        log.debug('epoch %d: train %.3e  val %.3e  mu %.1e', epoch, accepted.mse, val, mu)

        if val < record.best_val_mse:
            record.best_epoch = epoch
            best_weights = weights
            fails = 0
        else:
            fails += 1
            if fails >= config.patience:
                record.stop_reason = 'patience'
                break

    record.test_mse = mse(best_weights, test_set)
    log.info('Training %s stopped (%s) after %d epochs, best epoch %d, val %.3e, test %.3e',
             topology.label, record.stop_reason, record.epochs, record.best_epoch,
             record.best_val_mse, record.test_mse)
    return TrainedNetwork(best_weights, input_norm, target_norm), record


# ── Text serialisation ─────────────────────────────────────────

def _fmt(values):
    return ' '.join('%.17g' % v for v in np.ravel(values))


def dump_network(network):
    """Versioned plain-text form of a :class:`TrainedNetwork` as a list of lines."""
    topo = network.weights.topology
    lines = [
        f'network {FORMAT_VERSION}',
        f'activation {topo.activation}',
        'layers ' + ' '.join(str(s) for s in topo.layer_sizes),
        'input_lo ' + _fmt(network.input_norm.lo),
        'input_hi ' + _fmt(network.input_norm.hi),
        'target_lo ' + _fmt(network.target_norm.lo),
        'target_hi ' + _fmt(network.target_norm.hi),
    ]
    for index, (w, b) in enumerate(zip(network.weights.weights, network.weights.biases), start=1):
        lines.append(f'W{index} {w.shape[0]} {w.shape[1]}')
        lines.extend(_fmt(row) for row in w)
        lines.append(f'b{index} {b.shape[0]}')
        lines.append(_fmt(b))
    lines.append('end')
    return lines


def load_network(lines):
    """Inverse of :func:`dump_network`; ``lines`` is any iterator of text lines."""
    it = (line.strip() for line in lines)
    it = (line for line in it if line and not line.startswith('#'))

    def expect(key):
        line = next(it, None)
        if line is None:
            raise FormatVersionError(f'unexpected end of network block, wanted {key!r}')
        head, _, rest = line.partition(' ')
        if head != key:
            raise FormatVersionError(f'expected {key!r}, got {head!r}')
        return rest.split()

    version = expect('network')
    if version != [str(FORMAT_VERSION)]:
        raise FormatVersionError(f'unsupported network format {version}')
    activation = expect('activation')[0]
    sizes = [int(s) for s in expect('layers')]
    topology = Topology(sizes[0], tuple(sizes[1:-1]), sizes[-1], activation)
    norms = [np.array(expect(key), dtype=float)
             for key in ('input_lo', 'input_hi', 'target_lo', 'target_hi')]

    weights, biases = [], []
    for index in range(1, len(sizes)):
        rows, cols = (int(v) for v in expect(f'W{index}'))
        weights.append(np.array([next(it).split() for _ in range(rows)], dtype=float)
                       .reshape(rows, cols))
        (size,) = (int(v) for v in expect(f'b{index}'))
        biases.append(np.array(next(it).split(), dtype=float).reshape(size))
    expect('end')
    return TrainedNetwork(
        NetworkWeights(topology, tuple(weights), tuple(biases)),
        Normalizer(norms[0], norms[1]),
        Normalizer(norms[2], norms[3]),
    )
