import logging
import logging.handlers
import os
import sys


def setup_logging(log_level='INFO', log_file='', quiet=False, max_bytes=10 * 1024 * 1024, backup_count=5):
    """Setup logging for the command line tools.

    Console output goes to stderr so stdout stays free for machine-readable
    results. A rotating file log is added only when ``log_file`` is given.
    """

    # Configure root logger
    logger = logging.getLogger()
    logger.setLevel(getattr(logging, log_level.upper(), logging.INFO))

    # Clear existing handlers
    logger.handlers.clear()

    # Create formatters
    detailed_formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(filename)s:%(lineno)d - %(message)s'
    )

    simple_formatter = logging.Formatter(
        '%(asctime)s - %(levelname)s - %(message)s'
    )

    # File handler with rotation
    if log_file:
        try:
            log_dir = os.path.dirname(log_file)
            if log_dir:
                os.makedirs(log_dir, exist_ok=True)
            file_handler = logging.handlers.RotatingFileHandler(
                log_file,
                maxBytes=max_bytes,
                backupCount=backup_count
            )
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(detailed_formatter)
            logger.addHandler(file_handler)
        except OSError as e:
            sys.stderr.write(f"Warning: Could not setup file logging: {e}\n")

    # Console handler
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(logging.WARNING if quiet else logger.level)
    console_handler.setFormatter(simple_formatter)
    logger.addHandler(console_handler)

    logger.debug("flatnorm logging initialized")

    return logger
