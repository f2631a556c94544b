"""Canonical metric quantity text and tolerant parsing of model responses.

Formatting rule: values of at least one meter print as "X.XX meters",
smaller values as whole centimeters.  Parsing normalizes m / cm / mm and
feet to meters and, because models often restate the question's numbers
before answering, takes the final quantity in the text.
"""

from __future__ import annotations

import re

METER_DECIMALS = 2

_UNIT_TO_METERS = {
    "m": 1.0, "meter": 1.0, "meters": 1.0, "metre": 1.0, "metres": 1.0,
    "cm": 0.01, "centimeter": 0.01, "centimeters": 0.01,
    "centimetre": 0.01, "centimetres": 0.01,
    "mm": 0.001, "millimeter": 0.001, "millimeters": 0.001,
    "millimetre": 0.001, "millimetres": 0.001,
    "km": 1000.0,
    "ft": 0.3048, "foot": 0.3048, "feet": 0.3048,
    "in": 0.0254, "inch": 0.0254, "inches": 0.0254,
}

_NUMBER = r"[-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?"
_UNIT = r"(?:km|mm|cm|m|metres?|meters?|centimetres?|centimeters?|" \
        r"millimetres?|millimeters?|ft|foot|feet|in|inch|inches)"
_QUANTITY_RE = re.compile(
    rf"({_NUMBER})\s*({_UNIT})\b", re.IGNORECASE)
_BARE_NUMBER_RE = re.compile(_NUMBER)


def format_quantity(value_m: float, style: str = "auto") -> str:
    """Canonical text for a nonnegative metric value.

    style "auto" picks meters at >= 1 m and whole centimeters below;
    "meters" and "centimeters" force a unit.
    """
    if value_m < 0:
        raise ValueError(f"quantities are nonnegative, got {value_m}")
    if style == "meters" or (style == "auto" and value_m >= 1.0):
        return f"{value_m:.{METER_DECIMALS}f} meters"
    if style in ("auto", "centimeters"):
        return f"{round(value_m * 100):d} centimeters"
    raise ValueError(f"unknown style {style!r}")


def print_ulp(value_m: float) -> float:
    """Resolution of the printed representation (one unit in last place)."""
    return 0.01  # both formats resolve to centimeters


def parse_quantity(text: str) -> float | None:
    """Final metric quantity in the text, in meters; None when absent.

    A trailing bare number with no unit is read as meters.
    """
    matches = list(_QUANTITY_RE.finditer(text))
    if matches:
        m = matches[-1]
        return float(m.group(1)) * _UNIT_TO_METERS[m.group(2).lower()]
    bare = list(_BARE_NUMBER_RE.finditer(text))
    if bare:
        return float(bare[-1].group(0))
    return None


def format_point(p, decimals: int = METER_DECIMALS) -> str:
    """Canonical text for a camera-frame point: "(x, y, z) meters"."""
    x, y, z = (float(v) for v in p)
    return f"({x:.{decimals}f}, {y:.{decimals}f}, {z:.{decimals}f}) meters"


def format_unit_vector(v, decimals: int = METER_DECIMALS) -> str:
    x, y, z = (float(c) for c in v)
    return f"({x:.{decimals}f}, {y:.{decimals}f}, {z:.{decimals}f})"


_TRIPLE_RE = re.compile(
    rf"\(\s*({_NUMBER})\s*,\s*({_NUMBER})\s*,\s*({_NUMBER})\s*\)")


def parse_triple(text: str) -> tuple[float, float, float] | None:
    """Final "(x, y, z)" triple in the text, if any."""
    matches = list(_TRIPLE_RE.finditer(text))
    if not matches:
        return None
    m = matches[-1]
    return tuple(float(m.group(i)) for i in (1, 2, 3))
