"""
helpers.py
PURPOSE: Utility functions for timestamps, file names and flag parsing.
"""

import math
from datetime import datetime


def format_timestamp(dt=None, format_str="%Y-%m-%d %H:%M:%S"):
    """
    Format a datetime object as a string.

    Args:
        dt: datetime object (uses current time if None)
        format_str: strftime format string

    Returns:
        Formatted timestamp string
    """
    if dt is None:
        dt = datetime.now()
    return dt.strftime(format_str)


def safe_name(name):
    """Keep letters, digits and ._- ; spaces become underscores."""
    cleaned = "".join(c for c in str(name) if c.isalnum() or c in "._- ")
    return cleaned.strip().replace(" ", "_") or "result"


def parse_float_list(text, expected=None):
    """
    Parse "0.28,0.28,0.29" into floats.

    Raises:
        ValueError on a non-numeric entry or a wrong count
    """
    values = [float(p) for p in str(text).split(",") if p.strip()]
    if expected is not None and len(values) != expected:
        raise ValueError(f"Expected {expected} comma-separated values, got {len(values)}: {text!r}")
    if not all(math.isfinite(v) for v in values):
        raise ValueError(f"Values must be finite: {text!r}")
    return values
