"""Deterministic artifact writing.

All JSON artifacts are rendered with sorted keys, fixed separators, and
repr-quality floats so the same in-memory value always produces the same
bytes.  Writes go through a temp file in the destination directory plus
os.replace, so readers never observe a half-written artifact.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path


def canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def write_json(path: str | Path, payload) -> None:
    atomic_write_text(path, canonical_json(payload))


def write_csv_rows(path: str | Path, rows: list[list[str]]) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerows(rows)
    atomic_write_text(path, buffer.getvalue())
