"""
Flask application factory for the phase estimation service
"""
from flask import Flask
from werkzeug.utils import import_string


def create_app(config_class='config.Config'):
    """Create and configure Flask application

    ``config_class`` is an import path, a class, or a configured instance
    (for example from :func:`config.load_config`).
    """
    if isinstance(config_class, str):
        config_class = import_string(config_class)
    settings = config_class() if isinstance(config_class, type) else config_class

    app = Flask(__name__)
    app.config.from_object(settings)
    app.extensions['nooncal'] = settings

    # Register blueprints/routes
    from app import routes
    app.register_blueprint(routes.bp)

    return app
