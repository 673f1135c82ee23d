"""CSV and JSON emitters with provenance headers.

All writers are byte-deterministic: floats are written with ``repr`` (round
trip exact), JSON keys are sorted, and nothing time-dependent is recorded.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from . import __version__


def provenance_lines(config: dict | None) -> list[str]:
    lines = [f"eitrouter {__version__}"]
    if config is not None:
        lines.append("config: " + json.dumps(to_jsonable(config), sort_keys=True))
    return lines


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return "" if math.isnan(value) else repr(value)
    return str(value)


def write_csv(path, header, rows, comments=()) -> Path:
    """Write ``rows`` under ``header``; ``None``/NaN cells are left empty."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def read_csv_rows(path):
    """Yield ``(line_number, dict)`` for each data row, skipping ``#`` comments."""
    with open(path, newline="") as fh:
        lines = [(n, line) for n, line in enumerate(fh, 1) if line.strip() and not line.startswith("#")]
    if not lines:
        return None, []
    header = next(csv.reader([lines[0][1]]))
    rows = []
    for n, line in lines[1:]:
        values = next(csv.reader([line]))
        rows.append((n, dict(zip(header, values)), len(values) == len(header)))
    return [h.strip() for h in header], rows


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def write_json(path, payload: dict, config: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = dict(payload)
    doc["provenance"] = {"tool": "eitrouter", "version": __version__}
    if config is not None:
        doc["provenance"]["config"] = config
    path.write_text(json.dumps(to_jsonable(doc), indent=2, sort_keys=True) + "\n")
    return path
