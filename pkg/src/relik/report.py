"""Canonical JSON and CSV serialisation for reports.

Floats are written with 17 significant digits so every value round-trips
exactly; JSON keys are sorted, making a parse/re-emit cycle byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Any

from .evaluation import EvalReport


def format_float(x: float) -> str:
    return format(x, ".17g")


def _emit(obj: Any, indent: int, level: int, out: list[str]) -> None:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or (isinstance(obj, float) and not math.isfinite(obj)):
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, int):
        out.append(str(int(obj)))
    elif isinstance(obj, float):
        out.append(format_float(obj + 0.0))  # canonical zero: -0.0 would re-parse as the integer 0
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = sorted(obj.items(), key=lambda kv: str(kv[0]))
        for i, (k, v) in enumerate(items):
            out.append(pad + json.dumps(str(k), ensure_ascii=False) + ": ")
            _emit(v, indent, level + 1, out)
            out.append(",\n" if i < len(items) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        if all(o is None or isinstance(o, (int, float, str, bool)) for o in obj):
            parts = []
            for o in obj:
                buf: list[str] = []
                _emit(o, indent, level + 1, buf)
                parts.append("".join(buf))
            out.append("[" + ", ".join(parts) + "]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad)
            _emit(v, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "]")
    elif hasattr(obj, "item"):  # numpy scalar
        _emit(obj.item(), indent, level, out)
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    out: list[str] = []
    _emit(obj, indent, 0, out)
    return "".join(out) + "\n"


def emit_report(report: EvalReport, fmt: str = "json", manifest: dict | None = None) -> str:
    """Render ``report`` as canonical JSON (with its manifest) or CSV."""
    if fmt == "json":
        doc = report.as_dict()
        if manifest is not None:
            doc["manifest"] = manifest
        return dumps(doc)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(report.columns)
        for row in report.rows:
            cells = []
            for col in report.columns:
                v = row.get(col)
                if v is None:
                    cells.append("")
                elif isinstance(v, float):
                    cells.append(format_float(v))
                elif isinstance(v, (list, tuple)):
                    cells.append(" ".join(str(x) for x in v))
                else:
                    cells.append(str(v))
            writer.writerow(cells)
        return buf.getvalue()
    raise ValueError(f"unknown format {fmt!r}")
