"""
Logging utilities for ellreg
"""

import logging
from pathlib import Path
from datetime import datetime

import config


# Create logs directory
LOG_DIR = Path(config.LOG_DIR)
LOG_DIR.mkdir(parents=True, exist_ok=True)

# Configure logging
LOG_FILE = LOG_DIR / f"ellreg_{datetime.now().strftime('%Y%m%d')}.log"

# Create logger
logger = logging.getLogger("ellreg")
logger.setLevel(getattr(logging, config.LOG_LEVEL, logging.INFO))

if not logger.handlers:
    # File handler
    file_handler = logging.FileHandler(LOG_FILE)
    file_handler.setLevel(logging.INFO)

    # Console handler (for errors only)
    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.ERROR)

    # Formatter
    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    file_handler.setFormatter(formatter)
    console_handler.setFormatter(formatter)

    # Add handlers
    logger.addHandler(file_handler)
    logger.addHandler(console_handler)


def log_info(message: str):
    """Log info message"""
    logger.info(message)


def log_error(message: str, exc_info=None):
    """Log error message"""
    if exc_info:
        logger.error(message, exc_info=exc_info)
    else:
        logger.error(message)


def log_warning(message: str):
    """Log warning message"""
    logger.warning(message)


def log_context_created(tau: complex, series_cutoff: int, jet_cap: int):
    """Log modular context creation"""
    log_info(f"Context created: tau={tau}, cutoff={series_cutoff}, jet_cap={jet_cap}")


def log_integration_step(active: int, n_terms_in: int, n_terms_out: int, anchor: int):
    """Log one regularized integration step"""
    log_info(f"Integrated z{active}: anchor=z{anchor}, terms {n_terms_in} -> {n_terms_out}")


def log_residue(active: int, point: int, n_terms: int):
    """Log a residue extraction"""
    logger.debug(f"Residue z{active}=z{point}: {n_terms} terms")


def log_pv_result(value: complex, error: float, converged: bool, elapsed: float):
    """Log principal value oracle outcome"""
    log_info(f"PV oracle: value={value:.12g}, error={error:.3g}, converged={converged}, {elapsed:.2f}s")


def log_check_result(name: str, passed: bool, rel_err: float):
    """Log a named check"""
    level = logging.INFO if passed else logging.WARNING
    logger.log(level, f"Check {name}: {'PASS' if passed else 'FAIL'} (rel_err={rel_err:.3g})")
