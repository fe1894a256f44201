import logging
import logging.handlers
import sys
from pathlib import Path
from datetime import datetime
import glob
import os
from typing import Optional

# Log formats
CONSOLE_FORMAT = "%(asctime)s [%(levelname)s] %(message)s"
DETAILED_FILE_FORMAT = (
    "%(asctime)s [%(levelname)s] %(name)s: [%(filename)s:%(lineno)d] - %(message)s"
)

COMPONENT_LOGGERS = [
    "rates",
    "chain",
    "transform",
    "bounds",
    "solver",
    "scenario",
    "cli",
    "performance",
]


def cleanup_old_logs(logs_dir: Path, prefix: str, keep_count: int = 3):
    """Clean up old log files, keeping only the most recent ones."""
    pattern = str(logs_dir / f"{prefix}*.log")
    log_files = sorted(glob.glob(pattern), key=os.path.getctime, reverse=True)

    for old_file in log_files[keep_count:]:
        try:
            os.remove(old_file)
        except OSError as e:
            print(f"Error removing old log file {old_file}: {e}")


def setup_logging(log_dir: Optional[str] = "logs", verbose: bool = False):
    """Configure logging for a command-line run.

    Console output goes to stdout; when ``log_dir`` is given, every
    component logger also writes a detailed rotating file for this run.
    """
    console_formatter = logging.Formatter(CONSOLE_FORMAT, datefmt="%H:%M:%S")
    detailed_formatter = logging.Formatter(
        DETAILED_FILE_FORMAT, datefmt="%Y-%m-%d %H:%M:%S"
    )

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setFormatter(console_formatter)
    console_handler.setLevel(logging.DEBUG if verbose else logging.INFO)

    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG)
    root_logger.handlers = []  # Remove existing handlers
    root_logger.addHandler(console_handler)

    run_handler = None
    if log_dir is not None:
        logs_dir = Path(log_dir)
        logs_dir.mkdir(parents=True, exist_ok=True)
        cleanup_old_logs(logs_dir, "run_")

        run_log_filename = (
            logs_dir / f"run_{datetime.now().strftime('%Y%m%d_%H%M%S')}.log"
        )
        run_handler = logging.handlers.RotatingFileHandler(
            run_log_filename,
            maxBytes=10 * 1024 * 1024,  # 10MB
            backupCount=2,
            encoding="utf-8",
        )
        run_handler.setFormatter(detailed_formatter)
        run_handler.setLevel(logging.DEBUG)

    for logger_name in COMPONENT_LOGGERS:
        logger = logging.getLogger(logger_name)
        logger.handlers = []
        if run_handler is not None:
            logger.addHandler(run_handler)

    return logging.getLogger("cli")


def get_component_logger(name: str, level: Optional[int] = None) -> logging.Logger:
    """
    Get a logger for a specific component.

    Args:
        name: Name of the component/logger
        level: Optional logging level override

    Returns:
        logging.Logger: Configured logger instance
    """
    logger = logging.getLogger(name)
    if level is not None:
        logger.setLevel(level)
    return logger
