"""Deterministic CSV and JSON output.

Floats are written with 17 significant digits, keys in insertion order and
non-finite numbers as ``null``, so equal inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__

SCHEMA_NAME = "report_bundle.schema.json"
TOOL_NAME = "tripod-mzi"


def format_float(x: float) -> str:
    return format(x, ".17g")


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or obj is True or obj is False:
        return json.dumps(obj)
    if isinstance(obj, (bool, np.bool_)):
        return json.dumps(bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return format_float(x) if math.isfinite(x) else "null"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    return _encode(obj, indent, 0) + "\n"


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        x = float(value)
        return format_float(x) if math.isfinite(x) else "nan"
    return str(value)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(v) for v in row])
    return path


def timestamp() -> str | None:
    """ISO timestamp from ``SOURCE_DATE_EPOCH``, or ``None`` to keep output reproducible."""
    raw = os.environ.get("SOURCE_DATE_EPOCH")
    if not raw:
        return None
    moment = _dt.datetime.fromtimestamp(int(raw), tz=_dt.timezone.utc)
    return moment.strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass
class ReportBundle:
    command: str
    config: dict
    sections: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "tool": TOOL_NAME,
            "version": __version__,
            "timestamp": timestamp(),
            "command": self.command,
            "config": self.config,
        }
        out.update(self.sections)
        out["notes"] = list(self.notes)
        return out

    def write_json(self, path) -> Path:
        path = Path(path)
        path.write_text(dumps(self.to_dict()), encoding="utf-8")
        return path


def load_schema() -> dict:
    text = resources.files("tripod_mzi").joinpath("schema", SCHEMA_NAME).read_text(encoding="utf-8")
    return json.loads(text)


# table builders shared by the CLI


def schmidt_rows(basis, phi0_sq):
    for i in range(basis.n_modes):
        yield i + 1, basis.lambdas[i], basis.mu[i], phi0_sq[i]


def schmidt_table(basis, phi0_sq) -> list[dict]:
    return [
        {"i": i, "lambda": lam, "mu": mu, "phi0_sq": p}
        for i, lam, mu, p in schmidt_rows(basis, phi0_sq)
    ]


def source_table(spec, occupancy) -> list[dict]:
    return [
        {
            "i": i + 1,
            "occupancy": occupancy[i],
            "mean_x": spec.mean_x[i],
            "mean_y": spec.mean_y[i],
            "var_x": spec.var_x[i],
            "var_y": spec.var_y[i],
        }
        for i in range(spec.n_modes)
    ]
