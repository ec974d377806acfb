"""
JSON routes of the phase estimation service
"""
import logging
import threading

from flask import Blueprint, current_app, jsonify, request

from app.calibrator import estimate, load_estimator
from app.crb import crb_sigma, fisher_per_event
from app.errors import CalibrationError
from app.sensor import CountVector, SensorModel

log = logging.getLogger(__name__)

bp = Blueprint('main', __name__)

# Lazy-loaded estimator (stays in memory after first use)
_estimator = None
_estimator_lock = threading.Lock()


def _get_estimator():
    global _estimator
    with _estimator_lock:
        if _estimator is None:
            path = current_app.config['ESTIMATOR_PATH']
            try:
                _estimator = load_estimator(path)
                log.info('Estimator loaded from %s', path)
            except FileNotFoundError:
                log.info('No estimator at %s', path)
            except CalibrationError as e:
                log.warning('Cannot load estimator %s: %s', path, e)
        return _estimator


def set_estimator(estimator):
    """Swap the estimator served by ``/api/estimate``; ``None`` forces a reload."""
    global _estimator
    with _estimator_lock:
        _estimator = estimator


def _settings():
    return current_app.extensions['nooncal']


@bp.route('/')
@bp.route('/api/status')
def api_status():
    """Service, estimator and background calibration status."""
    from app.background import get_status
    estimator = _get_estimator()
    info = None
    if estimator is not None:
        info = {
            'projections': estimator.k,
            'phase_min': estimator.phase_min,
            'phase_max': estimator.phase_max,
            'provenance': dict(estimator.provenance),
        }
    settings = _settings()
    return jsonify({
        'name': settings.APP_NAME,
        'version': settings.APP_VERSION,
        'estimator': info,
        'calibration': get_status(),
    })


@bp.route('/api/estimate', methods=['POST'])
def api_estimate():
    """Estimate the phase of posted counts: ``{"counts": [...], "n_b": 50}``."""
    payload = request.get_json(silent=True) or {}
    if 'counts' not in payload:
        return jsonify({'error': 'No counts'}), 400
    if not isinstance(payload['counts'], list):
        return jsonify({'error': 'counts must be a list of integers'}), 400

    estimator = _get_estimator()
    if estimator is None:
        return jsonify({'error': 'No estimator loaded'}), 503

    settings = _settings()
    try:
        counts = CountVector(tuple(payload['counts']), float(payload.get('exposure', 1.0)))
        result = estimate(
            estimator,
            counts,
            n_b=int(payload.get('n_b', settings.N_B)),
            seed=int(payload.get('seed', settings.SEED)),
        )
    except (CalibrationError, ValueError, TypeError) as e:
        return jsonify({'error': str(e)}), 400

    return jsonify({
        'phi_hat_deg': result.phi_deg,
        'delta_phi_deg': result.delta_phi_deg,
        'n_b': result.n_b,
        'flag_clamped': result.clamped,
    })


@bp.route('/api/crb')
def api_crb():
    """Fisher information and Cramer-Rao sigma for ``?phase=<deg>&events=<M>``."""
    phase = request.args.get('phase', type=float)
    events = request.args.get('events', default=_settings().EVAL_EVENTS, type=float)
    if phase is None:
        return jsonify({'error': 'phase is required'}), 400
    try:
        model = SensorModel.from_config(_settings())
        sigma = crb_sigma(model, phase, events)
        fisher = fisher_per_event(model, phase)
    except (CalibrationError, ValueError) as e:
        return jsonify({'error': str(e)}), 400
    return jsonify({'phase_deg': phase, 'fisher_rad2': fisher, 'sigma_deg': sigma, 'M': events})


@bp.route('/api/calibrate', methods=['POST'])
def api_calibrate():
    """Start a background calibration from the configured record."""
    from app.background import calibrate_async, get_status
    if get_status()['running']:
        return jsonify({'status': 'running'}), 409
    calibrate_async(current_app._get_current_object())
    return jsonify({'status': 'started'}), 202
