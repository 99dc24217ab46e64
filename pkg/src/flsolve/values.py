"""Exact rational scalars backing every numeric value in the language.

Values are stored as ``fractions.Fraction`` in lowest terms, so decimals such
as 14.85 round-trip without floating-point drift and arithmetic is exact.
"""

from __future__ import annotations

import re
from fractions import Fraction

NumericValue = Fraction


class Unknown:
    """Sentinel for a quantity declared without a value (a ``# ?`` comment)."""

    _instance: "Unknown | None" = None

    def __new__(cls) -> "Unknown":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNKNOWN"


UNKNOWN = Unknown()

# Integer, decimal, or p/q literal with an optional sign.
NUMBER_PATTERN = r"[+-]?(?:\d+\.\d+|\.\d+|\d+(?:/\d+)?)"
_NUMBER_RE = re.compile(rf"^{NUMBER_PATTERN}$")


def parse_number(text: str) -> Fraction | None:
    """Parse an integer, decimal, or ``p/q`` literal; None if it is not one."""
    text = text.strip()
    if not _NUMBER_RE.match(text):
        return None
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        return None


def is_terminating_decimal(value: Fraction) -> bool:
    """True when the lowest-terms denominator has only 2 and 5 as factors."""
    den = value.denominator
    for prime in (2, 5):
        while den % prime == 0:
            den //= prime
    return den == 1


def format_number(value: Fraction) -> str:
    """Shortest exact rendering: a decimal when terminating, else ``p/q``."""
    num, den = value.numerator, value.denominator
    if den == 1:
        return str(num)
    if not is_terminating_decimal(value):
        return f"{num}/{den}"
    twos = fives = 0
    d = den
    while d % 2 == 0:
        twos += 1
        d //= 2
    while d % 5 == 0:
        fives += 1
        d //= 5
    digits = max(twos, fives)
    scaled = abs(num) * 10**digits // den
    text = str(scaled).rjust(digits + 1, "0")
    whole, frac = text[:-digits], text[-digits:].rstrip("0")
    sign = "-" if num < 0 else ""
    return f"{sign}{whole}.{frac}" if frac else f"{sign}{whole}"
