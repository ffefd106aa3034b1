"""
Logging configuration shared by the CLI and the web server
"""
import datetime
import logging
import os
from typing import Optional

LOG_FORMAT = '%(asctime)s - %(process)d - %(levelname)s - %(message)s'

_LEVELS = {
    'DEBUG': logging.DEBUG,
    'INFO': logging.INFO,
    'WARNING': logging.WARNING,
    'ERROR': logging.ERROR,
    'CRITICAL': logging.CRITICAL,
}


def setup_logging(level_name: str = 'INFO', log_dir: Optional[str] = None) -> Optional[str]:
    """
    Configure the root logger.

    Args:
        level_name: Level name, case-insensitive; unknown names fall back to INFO
        log_dir: Directory for a timestamped log file, or None for stderr only

    Returns:
        Path of the log file, or None when logging to stderr only
    """
    level = _LEVELS.get(str(level_name).upper(), logging.INFO)
    handlers = [logging.StreamHandler()]
    log_filename = None

    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        stamp = datetime.datetime.now().strftime('%Y%m%d_%H%M%S')
        log_filename = os.path.join(log_dir, f'clonal_{stamp}.log')
        handlers.append(logging.FileHandler(log_filename, mode='w'))

    logging.basicConfig(level=level, format=LOG_FORMAT,
                        datefmt='%Y-%m-%d %H:%M:%S', handlers=handlers, force=True)
    # numba's compiler chatter drowns everything at DEBUG
    logging.getLogger('numba').setLevel(logging.WARNING)
    if log_filename:
        logging.info(f'Log file path: {log_filename}')
    return log_filename
