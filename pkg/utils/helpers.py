"""
Utility helper functions for formatting and digests.
"""
import hashlib
import json
import math
from typing import Any


def format_percentage(value: float) -> str:
    """
    Render a percentage with exactly one decimal place.

    Args:
        value: Percentage in [0, 100]

    Returns:
        String such as "96.9"
    """
    return f"{value:.1f}"


def to_significant(value: float, digits: int = 9) -> float:
    """Round a float to `digits` significant digits."""
    if value == 0 or not math.isfinite(value):
        return float(value)
    return float(f"{value:.{digits}g}")


def canonical_json(data: Any) -> str:
    """JSON with sorted keys and fixed separators, suitable for hashing."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def sha256_digest(data: Any) -> str:
    """Hex sha256 of bytes, or of the canonical JSON of any other value."""
    if not isinstance(data, (bytes, bytearray)):
        data = canonical_json(data).encode("utf-8")
    return hashlib.sha256(data).hexdigest()

