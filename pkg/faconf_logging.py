import logging
import os

from rich.console import Console

from faconf_config import LOG_ENV_VAR, DEFAULT_LOG_LEVEL

_LEVELS = {
    "error": logging.ERROR,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}

_requested = os.environ.get(LOG_ENV_VAR, DEFAULT_LOG_LEVEL).strip().lower()

logging.basicConfig(level=_LEVELS.get(_requested, logging.INFO))
logger = logging.getLogger("FAConformer")
if _requested not in _LEVELS:
    logger.warning(f"Unknown {LOG_ENV_VAR}={_requested!r}, using 'info'")


rich_console = Console(width=200)
