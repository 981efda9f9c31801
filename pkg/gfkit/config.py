# pylint: disable=too-few-public-methods

import logging
from logging.handlers import WatchedFileHandler
import os
from pathlib import Path
import sys
from typing import Any, Dict, Optional

from pydantic import BaseSettings, validator  # pylint: disable=no-name-in-module
import toml

DEFAULT_LOG_LEVEL: str = "info"
DEFAULT_LOG_PATH: Optional[Path] = None
DEFAULT_LOG_FORMAT: str = "%(asctime)s %(levelname)s %(message)s"
DEFAULT_DEVICE_THREADS: int = 1
DEFAULT_PROJECT_CONFIG = "pyproject.toml"

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class Settings(BaseSettings):
    """
    Application settings. Every field can be set from an environment variable
    prefixed with ``GFK_``, like ``GFK_LOG=debug``.
    """

    log: str = DEFAULT_LOG_LEVEL
    log_path: Optional[Path] = DEFAULT_LOG_PATH
    log_format: str = DEFAULT_LOG_FORMAT
    device_threads: int = DEFAULT_DEVICE_THREADS

    class Config:
        """
        BaseSettings' config describing how the settings will be handled.
        The given ``env_prefix`` will make sure that settings can be read from
        environment variables starting with ``GFK_``.
        """

        env_prefix = "gfk_"

    @validator("log")
    def check_log_level(cls, value):  # pylint: disable=no-self-argument
        value = str(value).lower()

        if value not in LOG_LEVELS:
            raise ValueError(f"log level must be one of {', '.join(LOG_LEVELS)}")

        return value

    @validator("device_threads")
    def check_threads(cls, value):  # pylint: disable=no-self-argument
        if value < 1:
            raise ValueError("at least one thread is needed")

        return value


class Config:
    """
    Simple configuration object used across gfkit. The :class:`Config` loads
    the ``[tool.gfkit]`` table of a ``pyproject.toml`` if one is found.
    """

    def __init__(self) -> None:
        self.settings: Settings = Settings()

    @staticmethod
    def __setup_logging(settings: Settings) -> None:
        """
        Set the logging configuration of the root logger. The root logger is
        intentionally configured and it is not a mistake.

        :param settings: Merged settings
        :type settings: :class:`gfkit.config.Settings`
        """

        for handler in list(logging.root.handlers):
            logging.root.removeHandler(handler)

        logging.root.setLevel(LOG_LEVELS[settings.log])
        formatter = logging.Formatter(settings.log_format)

        stream_handler = logging.StreamHandler(sys.stdout)
        stream_handler.setFormatter(formatter)
        logging.root.addHandler(stream_handler)

        if settings.log_path:
            file_handler = WatchedFileHandler(str(settings.log_path))
            file_handler.setFormatter(formatter)
            logging.root.addHandler(file_handler)

    @staticmethod
    def __load_pyproject_toml(config_file: Path) -> Dict[str, Any]:
        """
        Load the ``[tool.gfkit]`` table of the given ``pyproject.toml``.

        :param config_file: Path of the pyproject.toml file
        :type config_file: Path

        :return: Returns the raw settings of the file
        :rtype: Dict[str, Any]
        """

        return toml.load(config_file).get("tool", {}).get("gfkit", {})

    @staticmethod
    def __get_settings_value(parameter: str, fallback: Any) -> Any:
        """
        Prefer the environment variable of a setting over the fallback value
        read from the configuration file.
        """

        prefix = Settings.Config.env_prefix.upper()
        return os.environ.get(f"{prefix}{parameter.upper()}", fallback)

    def load(self, config_file: Optional[Path] = None, **overrides: Any) -> Settings:
        """
        Load and merge the settings, then set up logging.

        Config priority:

            1. CLI arguments (given as ``overrides``)
            2. ENV Variables
            3. Config from file
            4. Default config (handled by pydantic settings)

        :param config_file: Path of the project file, ``pyproject.toml`` if not set
        :type config_file: Optional[Path]

        :return: Returns the merged settings
        :rtype: :class:`gfkit.config.Settings`
        """

        settings_path = Path(
            os.path.expandvars(str(config_file or DEFAULT_PROJECT_CONFIG))
        ).expanduser()

        loaded: Dict[str, Any] = dict()

        if settings_path.is_file():
            loaded = self.__load_pyproject_toml(settings_path)

        merged = {
            setting: self.__get_settings_value(setting, value)
            for setting, value in loaded.items()
        }
        merged.update(
            {key: value for key, value in overrides.items() if value is not None}
        )

        self.settings = Settings(**merged)
        self.__setup_logging(self.settings)

        logging.debug('Settings loaded, project file "%s"', settings_path)
        return self.settings


config = Config()  # pylint: disable=invalid-name
