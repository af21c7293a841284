"""Small file-format helpers: FNV-1a checksums, atomic writes, numeric text.

All toolkit outputs go through the atomic writers so a failing subcommand
never leaves a partially written file behind.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64_int(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def fnv1a64(data: bytes) -> str:
    """64-bit FNV-1a of raw bytes as 16 lowercase hex digits."""
    return f"{fnv1a64_int(data):016x}"


def atomic_write_bytes(path: os.PathLike | str, data: bytes) -> Path:
    """Write bytes via a temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
    return path


def atomic_write_text(path: os.PathLike | str, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def fmt9(x: float) -> str:
    """Render a float with 9 significant digits (the toolkit-wide policy)."""
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{float(x):.9g}"


def round9(x: float) -> float:
    """Float rounded to 9 significant digits, for stable JSON output."""
    return float(fmt9(x))


def write_csv(path: os.PathLike | str, header: list[str], rows: list[list[str]]) -> Path:
    lines = [",".join(header)] + [",".join(r) for r in rows]
    return atomic_write_text(path, "\n".join(lines) + "\n")


def read_csv(path: os.PathLike | str) -> tuple[list[str], list[list[str]]]:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.split("\n") if ln != ""]
    if not lines:
        return [], []
    header = lines[0].split(",")
    return header, [ln.split(",") for ln in lines[1:]]


def write_json(path: os.PathLike | str, obj) -> Path:
    return atomic_write_text(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")
