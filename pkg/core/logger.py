import logging
import sys
import json
from datetime import datetime, timezone
from typing import Optional
from core.config import settings

#record attributes passed through `extra=` that end up in structured output
CONTEXT_FIELDS = ("experiment", "seed", "delta", "k")


class JSONFormatter(logging.Formatter):
    #one JSON object per record, for production runs and log files
    def format(self, record: logging.LogRecord):
        log_data = {
            "time": datetime.fromtimestamp(record.created, tz=timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "function": record.funcName,
            "line": record.lineno,
        }

        for field in CONTEXT_FIELDS:
            if hasattr(record, field):
                log_data[field] = getattr(record, field)

        if record.exc_info:
            log_data["exception"] = self.formatException(record.exc_info)

        return json.dumps(log_data, default=str)


class ColoredFormatter(logging.Formatter):

    #colored console output, with the experiment tag when the record carries one

    COLORS = {
        'DEBUG': '\033[36m',  # Cyan
        'INFO': '\033[32m',  # Green
        'WARNING': '\033[33m',  # Yellow
        'ERROR': '\033[31m',  # Red
        'CRITICAL': '\033[35m',  # Magenta
        'RESET': '\033[0m'
    }

    def format(self, record: logging.LogRecord):
        levelname = record.levelname
        if levelname in self.COLORS:
            record.levelname = f"{self.COLORS[levelname]}{levelname}{self.COLORS['RESET']}"

        formatted = super().format(record)
        record.levelname = levelname

        experiment = getattr(record, "experiment", None)
        if experiment:
            formatted = f"{formatted} [{experiment}]"
        return formatted


def _console_formatter() -> logging.Formatter:
    style = settings.log_format
    if style == "auto":
        style = "console" if settings.is_development else "json"
    if style == "json":
        return JSONFormatter()
    return ColoredFormatter(fmt="%(asctime)s | %(levelname)-8s | %(name)s:%(funcName)s:%(lineno)d | %(message)s",
                            datefmt="%Y-%m-%d %H:%M:%S")


def setup_logging(level: Optional[str] = None):
    #logs go to stderr so that reports written to stdout stay parseable
    root_logger = logging.getLogger()
    root_logger.setLevel(level or settings.log_level)
    root_logger.handlers.clear()

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(_console_formatter())
    root_logger.addHandler(console_handler)

    if settings.log_file:
        file_handler = logging.FileHandler(settings.log_file)
        file_handler.setFormatter(JSONFormatter())
        root_logger.addHandler(file_handler)

    #numpy/scipy RuntimeWarnings (overflow in exp, quad accuracy) become log records
    logging.captureWarnings(True)

    logger = logging.getLogger(__name__)
    logger.debug(
        f"Logging configured: level={root_logger.level}, environment={settings.environment}, format={settings.log_format}"
    )


def get_logger(name: str) -> logging.Logger:

    return logging.getLogger(name)
