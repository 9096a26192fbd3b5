import sys

from loguru import logger as _logger

from app.config.settings import Config

_LEVELS = {"error": "ERROR", "info": "INFO", "debug": "DEBUG"}


class LoggerGuRu:
    """Custom logger configuration for the laboratory"""

    @staticmethod
    def setup(level: str = Config.MOELO_LOG) -> _logger:
        """Configure and return a Loguru logger writing to standard error.

        Standard output is reserved for command results, so every log line goes to stderr.
        """

        # Remove default handler
        _logger.remove()

        _logger.add(
            sys.stderr,
            colorize=sys.stderr.isatty(),
            format=(
                "<blue>{time:MMMM D, YYYY - HH:mm:ss}</blue> | "
                "<green><level>{level: <8}</level></green> | "
                "<cyan>{name}</cyan>:"
                "<cyan>{function}</cyan>:"
                "<cyan>{line}</cyan> - "
                "<green><level>{message}</level></green>"
            ),
            level=_LEVELS.get(level, "INFO"),
        )

        return _logger


# Initialize and export logger
logger = LoggerGuRu.setup()
__all__ = ["logger", "LoggerGuRu"]
