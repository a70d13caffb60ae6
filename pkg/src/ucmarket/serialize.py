"""Deterministic report rendering.

Reports must serialize byte-identically across reruns, so floats are
printed with a fixed 9 fractional digits (json.dumps cannot do that) and
keys keep their insertion order. Instance documents use shortest-repr
floats instead so that parse -> serialize -> parse is the identity.
"""

from __future__ import annotations

import json
import math


def _format_float(x: float, style: str) -> str:
    if math.isnan(x) or math.isinf(x):
        raise ValueError(f"cannot serialize non-finite number {x!r}")
    if x == 0.0:
        x = 0.0  # normalize -0.0
    if style == "repr":
        return repr(x)
    return f"{x:.9f}"


def _emit(value, indent: int, parts: list[str], style: str) -> None:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if value is None:
        parts.append("null")
    elif isinstance(value, bool):
        parts.append("true" if value else "false")
    elif isinstance(value, int):
        parts.append(str(value))
    elif isinstance(value, float):
        parts.append(_format_float(value, style))
    elif isinstance(value, str):
        parts.append(json.dumps(value))
    elif isinstance(value, dict):
        if not value:
            parts.append("{}")
            return
        parts.append("{\n")
        for k, (key, item) in enumerate(value.items()):
            if not isinstance(key, str):
                raise TypeError(f"object keys must be strings, got {key!r}")
            parts.append(f"{inner}{json.dumps(key)}: ")
            _emit(item, indent + 1, parts, style)
            parts.append(",\n" if k < len(value) - 1 else "\n")
        parts.append(pad + "}")
    elif isinstance(value, (list, tuple)):
        if not value:
            parts.append("[]")
            return
        parts.append("[\n")
        for k, item in enumerate(value):
            parts.append(inner)
            _emit(item, indent + 1, parts, style)
            parts.append(",\n" if k < len(value) - 1 else "\n")
        parts.append(pad + "]")
    else:
        raise TypeError(f"cannot serialize {type(value).__name__}")


def canonical_json(value, float_style: str = "fixed") -> str:
    """Render to JSON text deterministically; ends with a newline."""
    parts: list[str] = []
    _emit(value, 0, parts, float_style)
    parts.append("\n")
    return "".join(parts)


def profit_report_csv(report) -> str:
    """One row per entry plus a TOTAL row; money at full report precision."""
    lines = ["id,kind,profit_star,profit_plus,uplift"]
    for e in report.entries:
        lines.append(f"{e.id},{e.kind},{e.profit_star:.9f},"
                     f"{e.profit_plus:.9f},{e.uplift:.9f}")
    lines.append(f"TOTAL,,{report.total_star:.9f},"
                 f"{report.total_plus:.9f},{report.total_uplift:.9f}")
    return "\n".join(lines) + "\n"
