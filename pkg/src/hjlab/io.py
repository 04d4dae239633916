"""Deterministic persistence: CSV tables, JSON manifests, solution slabs.

CSV output is RFC-4180-style (CRLF, quoted strings when needed, mandatory
header row) with floats printed to 17 significant digits, so identical
configs and seeds reproduce byte-identical files.  JSON is written with
sorted keys and no timestamps; non-finite floats serialize as the strings
"inf", "-inf", "nan" and None as null.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .grid import SpaceTimeField, TorusGrid

__all__ = [
    "format_value",
    "write_csv",
    "read_csv",
    "jsonable",
    "write_json",
    "sha256_file",
    "save_slab",
    "load_slab",
]


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        x = float(v)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(v)


def write_csv(path: Path | str, columns: list[str], rows: list[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(c)) for c in columns])
    return path


def read_csv(path: Path | str) -> tuple[list[str], list[dict]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
        return list(reader.fieldnames or []), rows


def jsonable(obj):
    """Recursively convert to JSON-safe values (non-finite floats to strings)."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def write_json(path: Path | str, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def sha256_file(path: Path | str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def save_slab(field: SpaceTimeField, path: Path | str, metadata: dict | None = None) -> Path:
    """Persist a space-time field as a binary slab plus a JSON sidecar."""
    path = Path(path)
    if path.suffix != ".npy":
        path = path.with_suffix(".npy")
    path.parent.mkdir(parents=True, exist_ok=True)
    np.save(path, field.values)
    grid = field.grid
    sidecar = {
        "grid": {"d": grid.d, "n": grid.n, "T": grid.T, "nt": grid.nt},
        "shape": list(field.values.shape),
        "slab_sha256": sha256_file(path),
    }
    if metadata:
        sidecar["metadata"] = jsonable(metadata)
    write_json(path.with_suffix(".json"), sidecar)
    return path


def load_slab(path: Path | str) -> SpaceTimeField:
    path = Path(path)
    sidecar = json.loads(path.with_suffix(".json").read_text())
    g = sidecar["grid"]
    grid = TorusGrid(int(g["d"]), int(g["n"]), float(g["T"]), int(g["nt"]))
    return SpaceTimeField(grid, np.load(path))
