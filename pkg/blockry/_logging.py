from typing import Optional, Union
import logging
from logging.handlers import RotatingFileHandler
import os

from .config import CONFIG_DIR

LOGGINGDIR = os.path.join(CONFIG_DIR, "logs")
if not os.path.exists(LOGGINGDIR):
    os.makedirs(LOGGINGDIR)

DEFAULT_MAX_FORMAT_LENGTH = int(os.environ.get("BLOCKRY_LOG_MAX_FORMAT_LENGTH", 5000))
DEFAULT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class NotTooLongStringFormatter(logging.Formatter):
    """
    A logging formatter that truncates messages longer than `max_length`.
    Records carrying a traceback are never truncated.

    Attributes:
        max_length (int): Length of the kept prefix; "..." is appended after it.
    """

    def __init__(self, *args, max_length: Optional[int] = None, **kwargs):
        if max_length is None:
            max_length = DEFAULT_MAX_FORMAT_LENGTH
        super().__init__(*args, **kwargs)
        self.max_length = max(int(max_length) - 3, 0)

    def format(self, record):
        s = super().format(record)

        if record.exc_info:
            return s

        if len(s) > self.max_length:
            s = s[: self.max_length] + "..."
        return s


_formatter = NotTooLongStringFormatter(
    DEFAULT_FORMAT, max_length=DEFAULT_MAX_FORMAT_LENGTH
)


def _overwrite_add_handler(logger: logging.Logger):
    """
    Makes `logger.addHandler` attach the package formatter and skip duplicates.

    Args:
      logger (logging.Logger): The logger to patch.
    """
    _old_add_handler = logger.addHandler

    def _new_add_handler(hdlr):
        hdlr.setFormatter(_formatter)
        if hdlr not in logger.handlers:
            _old_add_handler(hdlr)

    logger.addHandler = _new_add_handler


def _children(logger: logging.Logger):
    """
    Direct child loggers of `logger` that were created through get_logger.
    """
    prefix = logger.name + "."
    children = set()
    for name, item in list(logger.manager.loggerDict.items()):
        if (
            isinstance(item, logging.Logger)
            and name.startswith(prefix)
            and "." not in name[len(prefix) :]
        ):
            children.add(item)
    return children


def _update_logger_handlers(logger: logging.Logger, prev_dir=None):
    """
    Re-attaches the formatter to every handler of `logger` and moves its
    rotating log file into LOGGINGDIR. The package root additionally gets a
    stream handler; children only write files and propagate to the root.

    Args:
      logger (logging.Logger): The logger to update, children included.
      prev_dir (str, optional): The previous logging directory.
    """
    if prev_dir is None:
        prev_dir = LOGGINGDIR
    has_stream_handler = False
    for hdlr in list(logger.handlers):
        if isinstance(hdlr, RotatingFileHandler):
            if hdlr.baseFilename in (
                os.path.join(prev_dir, f"{logger.name}.log"),
                os.path.join(LOGGINGDIR, f"{logger.name}.log"),
            ):
                hdlr.close()
                logger.removeHandler(hdlr)
                continue
        elif isinstance(hdlr, logging.StreamHandler):
            has_stream_handler = True
        hdlr.setFormatter(_formatter)

    if logger is BLOCKRY_LOGGER and not has_stream_handler:
        logger.addHandler(logging.StreamHandler())

    fh = RotatingFileHandler(
        os.path.join(LOGGINGDIR, f"{logger.name}.log"),
        maxBytes=1024 * 1024 * 5,
        backupCount=5,
        delay=True,
    )
    logger.addHandler(fh)

    for child in _children(logger):
        _update_logger_handlers(child, prev_dir=prev_dir)


def get_logger(name, propagate=True):
    """
    Returns the child logger `blockry.<name>` set up with the package handlers.

    Args:
      name (str): The name of the child logger.
      propagate (bool): Whether records are passed on to the `blockry` logger.

    Returns:
      logging.Logger: The configured logger.

    Example:
      >>> logger = get_logger("arnoldi")
      >>> logger.info("breakdown at step %d", 6)
    """
    sublogger = BLOCKRY_LOGGER.getChild(name)
    _overwrite_add_handler(sublogger)
    sublogger.propagate = propagate
    _update_logger_handlers(sublogger)

    return sublogger


def set_logging_dir(path):
    """
    Stores log files in `path` from now on, creating the directory if needed.

    Args:
      path (str): The new logging directory.
    """
    global LOGGINGDIR
    prev_dir = LOGGINGDIR
    LOGGINGDIR = path
    if not os.path.exists(path):
        os.makedirs(path)
    _update_logger_handlers(BLOCKRY_LOGGER, prev_dir=prev_dir)


def set_log_format(fmt: Optional[str] = DEFAULT_FORMAT, max_length: Optional[int] = None):
    """
    Sets the format string and truncation length used by all package handlers.

    Args:
      fmt (str): The format string for log messages.
      max_length (int, optional): Maximum message length before truncation.

    Example:
      >>> set_log_format("%(levelname)s %(message)s", max_length=200)
    """
    global _formatter
    _formatter = NotTooLongStringFormatter(fmt, max_length=max_length)
    _update_logger_handlers(BLOCKRY_LOGGER)


def set_log_level(level: Union[int, str]):
    """
    Sets the level of the package root logger, e.g. "DEBUG" or logging.WARNING.
    """
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
    BLOCKRY_LOGGER.setLevel(level)


BLOCKRY_LOGGER = logging.getLogger("blockry")

BLOCKRY_LOGGER.setLevel(logging.INFO)
_overwrite_add_handler(BLOCKRY_LOGGER)
_update_logger_handlers(BLOCKRY_LOGGER)


__all__ = [
    "BLOCKRY_LOGGER",
    "get_logger",
    "set_logging_dir",
    "set_log_format",
    "set_log_level",
]
