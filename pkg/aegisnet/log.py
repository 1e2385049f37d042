import logging
from logging.config import dictConfig
from typing import Iterable, Union

logging_config = {
    "version": 1,
    "formatters": {
        "default": {
            "format": "[%(name)s][%(levelname)s][%(asctime)s] %(message)s",
            "datefmt": "%Y-%m-%d %H:%M:%S",
        }
    },
    "filters": {"limit": {"()": "aegisnet.log.ReverseLevelFilter"}},
    "handlers": {
        "standard": {
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stdout",
            "formatter": "default",
            "filters": ["limit"],
        },
        "error": {
            "class": "logging.StreamHandler",
            "formatter": "default",
            "level": "ERROR",
        },
    },
    "root": {"level": "INFO", "handlers": ["standard", "error"]},
}


class ReverseLevelFilter(logging.Filter):
    """
    Reverse log level Filter
    Causes only log messages less than or equal to level to be processed
    """

    def __init__(self, level=logging.WARNING):
        super(ReverseLevelFilter, self).__init__()
        self.level = level

    def filter(self, record):
        return 1 if record.levelno <= self.level else 0


class LoggingMixin(object):
    """
    Logging Mixin class
    Adds a log property configured with the class's logger
    """

    @property
    def logger_name(self) -> str:
        return "{0}.{1}".format(self.__module__, self.__class__.__name__)

    @property
    def log(self) -> logging.Logger:
        return logging.getLogger(self.logger_name)


def init(debug: Union[bool, str, Iterable[str]] = False) -> None:
    """
    Initialize logging with the default logging configuration

    debug - True for debug logging everywhere, or package(s) to enable
    debug logging for
    """
    dictConfig(logging_config)

    if debug is True:
        logging.getLogger().setLevel(logging.DEBUG)
        return
    if not debug:
        return
    if isinstance(debug, str):
        debug = [debug]
    for package in debug:
        logging.getLogger(package).setLevel(logging.DEBUG)
