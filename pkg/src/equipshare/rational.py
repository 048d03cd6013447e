"""Small helpers for exact rational data."""

from __future__ import annotations

import math
from fractions import Fraction


def to_fraction(value) -> Fraction:
    """Exact conversion; floats go through their shortest repr so 0.8 stays 4/5."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value}")
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    # mpq and other numbers exposing numerator/denominator
    return Fraction(int(value.numerator), int(value.denominator))


def is_terminating(fr: Fraction) -> bool:
    d = fr.denominator
    for p in (2, 5):
        while d % p == 0:
            d //= p
    return d == 1


def decimal_str(value) -> str:
    """Shortest exact decimal text for terminating rationals, else a 17-digit float."""
    if isinstance(value, int):
        return str(value)
    fr = to_fraction(value)
    if fr.denominator == 1:
        return str(fr.numerator)
    if is_terminating(fr):
        k = 0
        while (10**k) % fr.denominator:
            k += 1
        scaled = abs(fr.numerator) * (10**k // fr.denominator)
        digits = str(scaled).rjust(k + 1, "0")
        text = (digits[:-k] + "." + digits[-k:]).rstrip("0").rstrip(".")
        return ("-" if fr < 0 else "") + text
    return repr(float(fr))


def as_number(fr: Fraction):
    """Collapse integral fractions to int so arithmetic stays cheap."""
    return fr.numerator if fr.denominator == 1 else fr
