"""
Entry point for the phase estimation service
Starts the Flask JSON server on the configured host and port
"""
import logging
import os
import sys

from app import create_app
from config import load_config


BANNER = """
  nooncal - N00N phase sensor estimation service
"""


def setup_logging():
    """Configure logging and reduce Flask output noise"""
    logging.basicConfig(level=logging.INFO, format='%(levelname)s %(name)s: %(message)s')
    # Disable Flask's default request logging
    logging.getLogger('werkzeug').setLevel(logging.ERROR)


def main():
    """Main entry point"""
    config = load_config(os.environ.get('NOONCAL_CONFIG') or None)

    print(BANNER)
    print(f"  Version: {config.APP_VERSION}")
    print(f"  Estimator: {config.ESTIMATOR_PATH}")
    print(f"  Server: http://{config.HOST}:{config.PORT}")
    print(f"\n  {'─' * 68}")
    print(f"  Press Ctrl+C to stop the server")
    print(f"  {'─' * 68}\n")

    setup_logging()

    app = create_app(config)

    try:
        app.run(
            host=config.HOST,
            port=config.PORT,
            debug=config.DEBUG,
            use_reloader=False  # background calibration threads live in this process
        )
    except KeyboardInterrupt:
        print("\n\n[Shutdown] Shutting down server...")
        sys.exit(0)
    except Exception as e:
        print(f"\n[Error] Error starting server: {e}")
        sys.exit(1)


if __name__ == '__main__':
    main()
