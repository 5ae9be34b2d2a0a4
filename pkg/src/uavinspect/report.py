"""JSON inspection reports.

A report is ``{"header": ..., "body": ...}``.  The header holds volatile
fields (creation time, tool version); the body is serialized canonically
(sorted keys, fixed separators) so identical inputs and parameters give
byte-identical bodies.
"""

from __future__ import annotations

import datetime as _dt
import json
import math
from pathlib import Path
from typing import Iterable, Optional

from . import __version__

SCHEMA_VERSION = "1.0"

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK = (1 << 64) - 1


def fnv1a64(data: bytes, h: int = FNV64_OFFSET) -> int:
    for byte in data:
        h = ((h ^ byte) * FNV64_PRIME) & _MASK
    return h


def file_hash(path) -> str:
    h = FNV64_OFFSET
    with open(path, "rb") as fh:
        while chunk := fh.read(1 << 20):
            h = fnv1a64(chunk, h)
    return f"{h:016x}"


def manifest(paths: Iterable) -> list[dict]:
    out = []
    for p in paths:
        p = Path(p)
        out.append({"path": str(p), "bytes": p.stat().st_size, "fnv1a64": file_hash(p)})
    return out


def _clean(obj):
    """Make ``obj`` JSON-safe: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def build_report(command: str, inputs: Iterable, parameters: dict, sections: dict) -> dict:
    body = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "manifest": manifest(inputs),
        "parameters": parameters,
        "sections": sections,
    }
    header = {
        "tool": "uavinspect",
        "tool_version": __version__,
        "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    return {"header": header, "body": _clean(body)}


def canonical_body(report: dict) -> bytes:
    return json.dumps(report["body"], sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_report(report: dict, path: Optional[str]) -> str:
    text = dumps(report)
    if path is None or str(path) == "-":
        print(text, end="")
    else:
        Path(path).write_text(text)
    return text


def read_body(path) -> bytes:
    return canonical_body(json.loads(Path(path).read_text()))
