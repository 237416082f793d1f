"""
Log level loader using environment variables.
"""
import os

from dotenv import load_dotenv

from config.constants import DEFAULT_LOG_LEVEL, LOG_LEVEL_ENV


def load_log_level() -> str:
    """Load the log level from the environment (a .env file is honoured)."""
    load_dotenv()
    return (os.getenv(LOG_LEVEL_ENV) or DEFAULT_LOG_LEVEL).strip().upper()
