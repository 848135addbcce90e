"""Atomic CSV/JSON writers and typed CSV readers for stage outputs."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from emspec.errors import InputError, PrerequisiteError


def fmt(value) -> str:
    """Render one cell: shortest round-trip floats, blank for NaN/None."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return ""
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _atomic(path: Path, write) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows) -> int:
    """Write ``rows`` under ``header`` atomically; returns the row count."""
    count = 0

    def body(fh):
        nonlocal count
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
            count += 1

    _atomic(Path(path), body)
    return count


def write_json(path, obj) -> None:
    _atomic(Path(path), lambda fh: fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n"))


def read_csv(path, prerequisite: str | None = None) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.is_file():
        hint = f"; run `emspec {prerequisite}` first" if prerequisite else ""
        raise PrerequisiteError(f"missing {path.name} in {path.parent}{hint}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"empty file: {path}")
    return rows[0], rows[1:]


def column(header: list[str], rows: list[list[str]], name: str, kind=float) -> np.ndarray:
    try:
        j = header.index(name)
    except ValueError:
        raise InputError(f"column {name!r} missing (have {header})") from None
    if kind is float:
        return np.array([float(r[j]) if r[j] != "" else np.nan for r in rows])
    if kind == "date":
        return np.array([r[j] for r in rows], dtype="datetime64[D]")
    return [r[j] for r in rows]


def sha256(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()
