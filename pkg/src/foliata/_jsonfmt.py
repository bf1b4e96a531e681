"""Deterministic JSON serialization with 17-significant-digit floats.

The stdlib ``json`` module offers no hook for float formatting, and lossless
round-trip of IEEE doubles is a hard output requirement, so this is a tiny
hand-rolled emitter for the value types we actually produce (dict, list,
tuple, str, bool, None, int, float and numpy scalars).
"""

from __future__ import annotations

import math

import numpy as np


def format_float(value: float) -> str:
    v = float(value)
    if math.isnan(v) or math.isinf(v):
        return "null"
    if v == int(v) and abs(v) < 1e16:
        return f"{int(v)}.0"
    return format(v, ".17g")


def _escape(s: str) -> str:
    out = []
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    return "".join(out)


def dumps(obj, indent: int = 2) -> str:
    """Serialize ``obj`` to a JSON string with stable float formatting."""
    return _write(obj, indent, 0) + "\n"


def _write(obj, indent, level):
    pad = " " * (indent * level)
    pad_in = " " * (indent * (level + 1))
    if obj is None:
        return "null"
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if isinstance(obj, str):
        return '"' + _escape(obj) + '"'
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [_write(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(pad_in + it for it in items) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'"{_escape(str(k))}": ' + _write(v, indent, level + 1)
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(pad_in + it for it in items) + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj)!r}")
