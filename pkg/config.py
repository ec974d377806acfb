"""
Configuration for the N00N phase-sensor calibration toolkit
"""
import os
from pathlib import Path

# Base directory
BASE_DIR = Path(__file__).parent.absolute()


class ConfigError(ValueError):
    """Bad key or value in a configuration file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)
        self.line = line


class Config:
    """Toolkit configuration"""

    # Application settings
    APP_NAME = 'nooncal'
    APP_VERSION = '1.0.0'

    # Sensor model: angles in degrees, rate in events per second
    PROJECTIONS = 4
    OFFSETS_DEG = (0.0, 90.0, 180.0, 270.0)
    VISIBILITY = (0.93,)
    EFFICIENCY = (1.0,)
    RATE = 10000.0

    # Calibration grid
    STEP_DEG = 1.0
    PHASE_MIN_DEG = 0.0
    PHASE_MAX_DEG = 180.0
    EXPOSURE_S = 1.0

    # Network and Levenberg-Marquardt training
    HIDDEN_SIZES = (30,)
    TRAIN_FRACTIONS = (0.70, 0.15, 0.15)
    MU0 = 1e-3
    MU_UP = 10.0
    MU_DOWN = 0.1
    MU_MAX = 1e10
    MAX_EPOCHS = 1000
    PATIENCE = 6
    MIN_GRAD = 1e-7

    # Bootstrap
    N_B = 50

    # Error evaluation
    REPETITIONS = 100
    EVAL_PHASES = 30
    EVAL_EVENTS = 10000

    # Sweeps; hidden layouts are written as '20x10' for two layers
    SWEEP_HIDDEN = ('5', '10', '20', '30', '20x10', '50')
    SWEEP_N_B = (5, 10, 25, 50, 100)
    N_TRAININGS = 35

    # F_M table
    TEST_PHASES_DEG = (20.8, 45.0, 90.0, 140.0, 168.8)
    EVENT_COUNTS = (1000, 5000, 10000, 40000)

    SEED = 0
    WORKERS = 1

    # Estimation service
    HOST = '127.0.0.1'
    PORT = 5000
    DEBUG = False
    ESTIMATOR_PATH = os.environ.get('NOONCAL_ESTIMATOR') or str(BASE_DIR / 'estimator.txt')
    RECORD_PATH = os.environ.get('NOONCAL_RECORD', '')

    def as_items(self):
        """Effective settings as ``(KEY, text)`` pairs, in declaration order."""
        items = []
        for key in _KEYS:
            value = getattr(self, key)
            if isinstance(value, tuple):
                value = ','.join(str(v) for v in value)
            items.append((key, str(value)))
        return items

    def override(self, **values):
        """Set attributes on this instance, skipping ``None`` values."""
        for key, value in values.items():
            if value is None:
                continue
            if key not in _KEYS:
                raise ConfigError(f'unknown setting {key!r}')
            setattr(self, key, _coerce(key, value))
        return self


_KEYS = [
    name for name, value in vars(Config).items()
    if name.isupper() and not callable(value)
]


def _coerce(key, raw):
    """Coerce *raw* (text or value) to the type of ``Config.<key>``."""
    default = getattr(Config, key)
    if not isinstance(raw, str):
        if isinstance(default, tuple) and not isinstance(raw, (tuple, list)):
            raw = (raw,)
        return tuple(raw) if isinstance(default, tuple) else raw

    text = raw.strip()
    if isinstance(default, bool):
        return text.lower() in {'1', 'true', 'yes', 'y', 'on'}
    if isinstance(default, tuple):
        parts = [p.strip() for p in text.split(',') if p.strip()]
        kind = type(default[0]) if default else str
        return tuple(kind(p) for p in parts)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


def load_config(path=None):
    """Build a :class:`Config` from defaults, ``NOONCAL_*`` env and *path*.

    The file holds ``KEY = value`` lines; ``#`` starts a comment. Lists
    are comma separated. Unknown keys and unparsable values raise
    :class:`ConfigError` naming the line.
    """
    config = Config()

    for key in _KEYS:
        raw = os.environ.get(f'NOONCAL_{key}')
        if raw is None or raw.strip() == '':
            continue
        try:
            setattr(config, key, _coerce(key, raw))
        except ValueError as exc:
            raise ConfigError(f'NOONCAL_{key}: {exc}') from exc

    if path is None:
        return config

    with open(path, encoding='utf-8') as fh:
        for number, line in enumerate(fh, start=1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ConfigError(f'expected KEY = value, got {line!r}', number)
            key, value = (part.strip() for part in line.split('=', 1))
            key = key.upper()
            if key not in _KEYS:
                raise ConfigError(f'unknown setting {key!r}', number)
            try:
                setattr(config, key, _coerce(key, value))
            except ValueError as exc:
                raise ConfigError(f'{key}: {exc}', number) from exc
    return config
