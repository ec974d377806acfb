"""Background calibration for the estimation service."""
import logging
import threading
from datetime import datetime, timezone

log = logging.getLogger(__name__)

_lock = threading.Lock()

_status = {
    'running': False,
    'stage': '',
    'progress': 0,
    'stop_reason': '',
    'last_run': None,
    'error': '',
}
_status_lock = threading.Lock()


def get_status():
    with _status_lock:
        return dict(_status)


def _set(**kwargs):
    with _status_lock:
        _status.update(kwargs)


def calibrate_async(app):
    """Spawn background thread for record loading, training and the estimator swap.

    The status only changes once the thread holds the calibration lock.
    """
    thread = threading.Thread(target=_run, args=(app,), daemon=True)
    thread.start()
    return thread


def _run(app):
    if not _lock.acquire(timeout=2):
        log.info('calibration already running, skipping')
        return

    _set(running=True, stage='record', progress=5, error='')
    try:
        with app.app_context():
            from .calibrator import calibrate, save_estimator
            from .experiments import StudySettings, load_record_csv, simulate_record
            from .routes import set_estimator
            from .rng import derive_seed
            from .sensor import SensorModel

            config = app.extensions['nooncal']
            settings = StudySettings.from_config(config)
            if config.RECORD_PATH:
                record = load_record_csv(config.RECORD_PATH)
                log.info('calibration record: %d phases from %s', len(record), config.RECORD_PATH)
            else:
                model = SensorModel.from_config(config)
                record = simulate_record(model, settings.step_deg, settings.exposure,
                                         derive_seed(config.SEED, 0),
                                         settings.phase_min, settings.phase_max)
                log.info('calibration record: %d simulated phases', len(record))

            _set(stage='training', progress=20)
            estimator = calibrate(record, settings.topology(record.k), settings.train,
                                  settings.n_b, config.SEED)

            _set(stage='saving', progress=90)
            save_estimator(estimator, config.ESTIMATOR_PATH)
            set_estimator(estimator)

            _set(running=False, stage='done', progress=100,
                 stop_reason=estimator.history.stop_reason, last_run=_now())
            log.info('calibration complete (%s)', estimator.history.stop_reason)

    except Exception as e:
        log.error('calibration failed: %s', e, exc_info=True)
        _set(running=False, stage='error', progress=0, error=str(e))
    finally:
        _lock.release()


def _now():
    return datetime.now(timezone.utc).isoformat()
