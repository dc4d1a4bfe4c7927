"""Delimited text tables with a commented header, and content digests."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path, columns: dict, header: dict | None = None) -> str:
    """Write columns (name -> 1D sequence) as tab-separated text; return the SHA-256 digest.

    Header lines start with '#': first the key/value metadata (JSON-encoded
    values), then the column names.
    """
    path = Path(path)
    names = list(columns)
    cols = [list(np.asarray(columns[n]).tolist()) if not isinstance(columns[n], list) else columns[n] for n in names]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("columns have different lengths")
    lines = []
    for k, v in (header or {}).items():
        lines.append(f"# {k}: {json.dumps(v, sort_keys=True, default=_jsonable)}")
    lines.append("# " + "\t".join(names))
    for i in range(n):
        lines.append("\t".join(_fmt(c[i]) for c in cols))
    text = "\n".join(lines) + "\n"
    path.write_text(text)
    return sha256_text(text)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    return str(o)


def read_table(path):
    """Return (header dict, column dict of numpy arrays or string lists).

    The last comment line holds the column names; earlier ones are metadata.
    """
    comments, rows = [], []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# "):
            comments.append(line[2:])
        elif line.strip():
            rows.append(line.split("\t"))
    header = {}
    for body in comments[:-1]:
        k, v = body.split(": ", 1)
        header[k] = json.loads(v)
    names = comments[-1].split("\t") if comments else []
    cols = {}
    for j, name in enumerate(names):
        vals = [r[j] for r in rows]
        try:
            cols[name] = np.array([float(v) for v in vals])
        except ValueError:
            cols[name] = vals
    return header, cols


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
