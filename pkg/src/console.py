"""
Console Output for Kettlewatch
Status lines gated by the KETTLEWATCH_LOG verbosity setting.
"""

import os
import sys

LEVELS = {"quiet": 0, "info": 1, "debug": 2}


def verbosity() -> int:
    """Current verbosity level; unknown values fall back to info."""
    return LEVELS.get(os.getenv("KETTLEWATCH_LOG", "info").strip().lower(), LEVELS["info"])


def info(message: str):
    if verbosity() >= LEVELS["info"]:
        print(message)


def debug(message: str):
    if verbosity() >= LEVELS["debug"]:
        print(f"   🔎 {message}")


def warn(message: str):
    if verbosity() >= LEVELS["info"]:
        print(f"⚠️  {message}")


def banner(title: str):
    info("\n" + "=" * 80)
    info(title)
    info("=" * 80)


def error_line(kind: str, message: str, **fields) -> str:
    """
    Print a single machine-parsable error line to stderr.

    Args:
        kind: Short error category, e.g. 'config' or 'numerical_quality'
        message: Human prose
        **fields: Extra key=value tokens (None values are skipped)

    Returns:
        str: The line that was printed
    """
    tokens = [f"kind={kind}"]
    for key, value in fields.items():
        if value is None:
            continue
        if isinstance(value, float):
            value = f"{value:.3e}"
        tokens.append(f"{key}={value}")
    prose = " ".join(str(message).split())
    line = f"ERROR: {' '.join(tokens)} {prose}"
    print(line, file=sys.stderr)
    return line
