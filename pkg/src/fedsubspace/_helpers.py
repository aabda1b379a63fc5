"""Internal helper functions."""

from __future__ import annotations

import enum
import math
from collections.abc import Mapping
from typing import Any, TypeVar

E = TypeVar("E", bound=enum.Enum)


def _parse_enum(
    enum_cls: type[E],
    value: Any,
    int_map: Mapping[int, E] | None = None,
) -> E | None:
    """Return an *enum_cls* member from a member, string, int, or ``None``."""
    if value is None:
        return None
    if isinstance(value, enum_cls):
        return value
    if isinstance(value, int):
        if int_map and value in int_map:
            return int_map[value]
        raise ValueError(f"Unknown integer {value} for {enum_cls.__name__}")
    if isinstance(value, str):
        text = value.strip()
        for member in enum_cls:
            if member.value == text:
                return member
        upper = text.upper()
        for member in enum_cls:
            if member.name == upper:
                return member
        raise ValueError(f"Unknown value '{value}' for {enum_cls.__name__}")
    raise TypeError(f"Cannot convert {type(value)} to {enum_cls.__name__}")


def _enum_to_int(member: enum.Enum, int_map: Mapping[int, enum.Enum]) -> int:
    """Convert an enum member back to its integer code."""
    for integer, mapped_member in int_map.items():
        if mapped_member is member:
            return integer
    raise ValueError(f"No integer mapping found for {member!r}")


def _format_float(value: float | None) -> str:
    """Format a float with 17 significant digits; ``None`` becomes ``NA``."""
    if value is None:
        return "NA"
    return format(float(value), ".17g")


def _format_flag(value: bool | None) -> str:
    """Format a hypothesis flag as ``1``/``0``, or ``NA`` when not applicable."""
    if value is None:
        return "NA"
    return "1" if value else "0"


def _json_float(value: float | None) -> float | None:
    """Return *value* unless it is missing or non-finite (JSON has no NaN)."""
    if value is None:
        return None
    value = float(value)
    if not math.isfinite(value):
        return None
    return value
