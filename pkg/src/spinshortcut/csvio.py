"""Fixed-format CSV output shared by all trace types."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


def format_value(x) -> str:
    return format(float(x), ".9g")


def write_csv(path, columns: dict) -> Path:
    """Write equal-length columns with a header row, 9 significant digits."""
    path = Path(path)
    names = list(columns)
    data = [np.asarray(columns[n], dtype=float).ravel() for n in names]
    n = {len(d) for d in data}
    if len(n) != 1:
        raise ValueError(f"column lengths differ: {dict(zip(names, map(len, data)))}")
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(names)
            for row in zip(*data):
                writer.writerow([format_value(x) for x in row])
    except OSError as exc:
        raise OSError(f"could not write {path}: {exc}") from exc
    return path


def read_csv(path) -> dict:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    arr = np.array(body, dtype=float).reshape(len(body), len(header))
    return {name: arr[:, i] for i, name in enumerate(header)}
