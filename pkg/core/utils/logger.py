import sys
from datetime import datetime
from pathlib import Path
from typing import Optional

from loguru import logger

CONSOLE_FORMAT = "<level>{level: <7}</level> {message}"
FILE_FORMAT = "{time:YYYY-MM-DDTHH:mm:ss.SSS} | {level: <7} | {name}:{line} | {message}"


def configure_logging(verbose: bool = False, log_path: Optional[str] = None) -> None:
    """Diagnostics go to stderr only; stdout is kept for reports."""
    logger.remove()
    logger.add(sys.stderr, level="DEBUG" if verbose else "INFO", format=CONSOLE_FORMAT, colorize=False)
    if log_path:
        Path(log_path).parent.mkdir(parents=True, exist_ok=True)
        logger.add(log_path, level="DEBUG", format=FILE_FORMAT, mode="a", encoding="utf-8")


def save_run_to_log(command: str, summary: dict, log_path: str) -> None:
    # one appended block per run, next to the regular log lines
    Path(log_path).parent.mkdir(parents=True, exist_ok=True)
    entry = f"""
🚦 DESWS Run
Timestamp: {datetime.now().isoformat()}
Command: {command}
Summary: {summary}
──────────────────────────────────────
"""
    with open(log_path, "a", encoding="utf-8") as f:
        f.write(entry)
