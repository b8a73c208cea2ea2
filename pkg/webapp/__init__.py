# webapp/__init__.py

import logging

# Load .env for ANY entrypoint (python app.py, flask run, gunicorn, etc.)
from dotenv import load_dotenv
load_dotenv()

from flask import Flask, jsonify
from flask_cors import CORS

from db import init_db
from .config import Config
from .routes.meta import meta_bp
from .routes.runs import runs_bp


def create_app() -> Flask:
    app = Flask("webapp")

    # Core config
    app.config.from_object(Config)
    logging.getLogger("anelastic").setLevel(app.config["ANELASTIC_LOG_LEVEL"].upper())

    # CORS: read-only API, any origin
    CORS(app, resources={r"/api/*": {"origins": "*"}})

    # Init DB (run index tables)
    init_db()

    # Register blueprints
    app.register_blueprint(meta_bp)
    app.register_blueprint(runs_bp)

    @app.errorhandler(404)
    def not_found(err):
        return jsonify({"error": "not found"}), 404

    return app
