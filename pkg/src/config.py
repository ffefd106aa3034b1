"""
Configuration module for the clonal interference toolkit
"""
import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


class Config:
    """Configuration class for the application"""

    # Flask configuration
    FLASK_HOST = os.getenv('FLASK_HOST', '0.0.0.0')
    FLASK_PORT = int(os.getenv('FLASK_PORT', 33079))
    FLASK_DEBUG = os.getenv('FLASK_DEBUG', 'False').lower() == 'true'
    API_MAX_K = int(os.getenv('CLONAL_API_MAX_K', 5000))

    # Logging
    LOG_LEVEL = os.getenv('CLONAL_LOG_LEVEL', 'INFO')
    LOG_DIR = os.getenv('CLONAL_LOG_DIR')

    # Monte-Carlo defaults
    BASE_SEED = int(os.getenv('CLONAL_BASE_SEED', 20240601))
    PARALLELISM = int(os.getenv('CLONAL_PARALLELISM', 1))
    MAX_ATTEMPTS = int(os.getenv('CLONAL_MAX_ATTEMPTS', 200))
    PROGRESS = os.getenv('CLONAL_PROGRESS', 'False').lower() == 'true'

    # Numerics
    FEASIBILITY_TOL = float(os.getenv('CLONAL_FEASIBILITY_TOL', 1e-12))
    ODE_RTOL = float(os.getenv('CLONAL_ODE_RTOL', 1e-8))

    # Case-table data file
    CASE_TABLE = os.getenv('CLONAL_CASE_TABLE')

    @classmethod
    def is_log_file_enabled(cls):
        """Check if a log directory is configured"""
        return bool(cls.LOG_DIR)

    @classmethod
    def get_case_table_path(cls):
        """Get the case-table data file, falling back to the shipped copy"""
        if cls.CASE_TABLE:
            return cls.CASE_TABLE
        return os.path.join(os.path.dirname(__file__), 'data', 'case_tables.yaml')
