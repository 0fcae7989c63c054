from flask import Flask

from .config import Settings, load_settings


def create_app(settings: Settings | None = None):
    # --- Configuration ---
    settings = settings or load_settings()

    app = Flask(__name__)
    app.config["DOFLAB_SETTINGS"] = settings
    app.logger.setLevel(settings.log_level)

    # Register the Blueprints
    from . import api_bounds, api_schemes

    app.register_blueprint(api_bounds.bp)
    app.register_blueprint(api_schemes.bp)

    return app
