import os
import sys
import threading

import logfire
from loguru import logger

from patchscale.config.settings import Settings

_FORMAT = "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level}</level> | <cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"


class LoggerService:
    _instance = None
    _lock = threading.Lock()

    def __new__(cls):
        if not cls._instance:
            with cls._lock:
                if not cls._instance:
                    cls._instance = super(LoggerService, cls).__new__(cls)
                    cls._instance._setup_logger()
        return cls._instance

    def _setup_logger(self):
        settings = Settings()
        logger.remove()
        if os.getenv("LOGFIRE_TOKEN"):
            try:
                logfire.configure(
                    token=os.getenv("LOGFIRE_TOKEN"),
                    send_to_logfire="if-token-present",
                    service_name=settings.logfire_service_name,
                    service_version=settings.logfire_service_version,
                    environment=settings.environment,
                    console=False,
                )
                logger.add(**logfire.loguru_handler())
            except Exception as e:
                print(f"Warning: Failed to configure Logfire: {e}", file=sys.stderr)

        logger.add(
            sys.stderr,
            level=settings.log_level.upper(),
            format=_FORMAT,
            backtrace=True,
        )

    @staticmethod
    def get_logger(name: str | None = None):
        """
        Return a loguru logger bound to an optional name.
        If name is None, returns the global logger.
        """
        return logger.bind(name=name) if name else logger

    def set_level(self, level: str):
        """Replace the stderr sink with one at `level` (used by `--log-level`)."""
        logger.remove()
        logger.add(
            sys.stderr,
            level=level.upper(),
            format=_FORMAT,
            backtrace=True,
        )
