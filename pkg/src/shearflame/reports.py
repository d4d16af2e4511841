"""Deterministic JSON/CSV emission with atomic writes.

Outputs never carry timestamps; identical inputs and seeds must produce
byte-identical files.  Writers go through a temporary file in the target
directory followed by an atomic rename, so failures never leave partial
files behind.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, payload) -> None:
    text = json.dumps(_to_jsonable(payload), sort_keys=True, indent=2) + "\n"
    _atomic_write_text(Path(path), text)


def write_csv(path, header, columns) -> None:
    """Write named columns (equal length) as CSV with full float precision."""
    cols = [np.asarray(c) for c in columns]
    rows = len(cols[0])
    lines = [",".join(header)]
    for i in range(rows):
        lines.append(",".join(_fmt(c[i]) for c in cols))
    _atomic_write_text(Path(path), "\n".join(lines) + "\n")


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)
