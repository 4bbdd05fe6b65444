from patchscale.config.settings import Settings
from patchscale.services.logger_service import LoggerService


class SingletonMeta(type):
    """A metaclass for creating singleton classes."""

    _instances = {}

    def __call__(cls, *args, **kwargs):
        if cls not in cls._instances:
            cls._instances[cls] = super().__call__(*args, **kwargs)
        return cls._instances[cls]


class State(metaclass=SingletonMeta):
    """Process-wide state (singleton).

    Holds the configured logger and the environment settings. Worker
    processes build their own instance on first use.
    """

    logger = LoggerService().get_logger()
    settings = None

    def __init__(self):
        self._logger_service = LoggerService()
        self.logger = self._logger_service.get_logger()
        State.logger = self.logger
        self.settings = Settings()
        State.settings = self.settings

    @classmethod
    def get_settings(cls) -> Settings:
        if cls.settings is None:
            cls()
        return cls.settings

    def set_log_level(self, level: str):
        self._logger_service.set_level(level)
