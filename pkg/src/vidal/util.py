"""Small numeric helpers shared across modules."""

from __future__ import annotations

import math
from fractions import Fraction


def round_half_up(x: float) -> int:
    """Round to nearest integer, halves toward +infinity.

    Deterministic alternative to banker's rounding; used anywhere a pixel
    coordinate or frame index is derived from a real value.
    """
    return int(math.floor(x + 0.5))


def exact_fraction_count(fraction: float, total: int) -> int:
    """round(fraction * total) computed without float drift.

    ``0.8 * 270`` is 216.00000000000003 in binary floating point; going
    through the decimal literal keeps counts like these exact.
    """
    return round_half_up(float(Fraction(str(fraction)) * total))


def ceil_fraction_count(fraction: float, total: int) -> int:
    """ceil(fraction * total) computed without float drift."""
    return math.ceil(Fraction(str(fraction)) * total)
