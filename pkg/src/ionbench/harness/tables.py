"""Tab-separated result files with '#' metadata lines."""

from pathlib import Path

import numpy as np


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path, columns, rows, meta=None, provenance=None):
    """``provenance`` (dict) is appended to every row as extra columns."""
    provenance = provenance or {}
    cols = list(columns) + list(provenance)
    lines = [f"# {k}: {v}\n" for k, v in (meta or {}).items()]
    lines.append("\t".join(cols) + "\n")
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} fields, expected {len(columns)}")
        lines.append("\t".join(fmt(v) for v in list(row) + list(provenance.values())) + "\n")
    Path(path).write_text("".join(lines), encoding="utf-8")
    return Path(path)


def read_table(path):
    """(meta dict, column names, rows as lists of strings)."""
    meta, cols, rows = {}, None, []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].partition(":")
            meta[k.strip()] = v.strip()
        elif cols is None:
            cols = line.split("\t")
        elif line:
            rows.append(line.split("\t"))
    return meta, cols, rows
