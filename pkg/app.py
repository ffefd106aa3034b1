#!/usr/bin/env python3
"""
Clonal interference web service

A Flask application exposing fitness summaries, classifications,
predictions, ODE solutions and single simulations as JSON.
"""
import logging

from flask import Flask

from src.case_tables import case_table
from src.config import Config
from src.utils.logging_setup import setup_logging

# Import route blueprints
from src.routes.main import main_bp
from src.routes.api import api_bp

logger = logging.getLogger(__name__)


def create_app():
    """Application factory pattern"""
    app = Flask(__name__)

    # Register blueprints
    app.register_blueprint(main_bp)
    app.register_blueprint(api_bp)

    return app


def main():
    """Main entry point"""
    setup_logging(Config.LOG_LEVEL, Config.LOG_DIR)
    app = create_app()

    logger.info(f'Case tables: {", ".join(sorted(case_table.tables))} from {case_table.source}')
    logger.info(f'Simulation requests limited to K <= {Config.API_MAX_K}')

    app.run(host=Config.FLASK_HOST, port=Config.FLASK_PORT, debug=Config.FLASK_DEBUG)


if __name__ == '__main__':
    main()
