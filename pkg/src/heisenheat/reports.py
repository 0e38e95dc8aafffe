"""CSV writers and the run manifest.

Floats are written with 17 significant digits so every value round-trips
exactly; the decimal separator is always '.'.
"""
from __future__ import annotations

import csv
import datetime as _dt
import json
import math
import os
import platform
from pathlib import Path

import numpy as np

from . import __version__

__all__ = [
    "MANIFEST_NAME",
    "OutputExistsError",
    "format_value",
    "write_csv",
    "read_csv",
    "prepare_out_dir",
    "RunManifest",
]

MANIFEST_NAME = "run-manifest.json"


class OutputExistsError(FileExistsError):
    """The output directory already holds results and ``force`` was not given."""


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.17g}"
    if v is None:
        return ""
    return str(v)


def write_csv(path, columns, rows) -> Path:
    """``rows`` are mappings keyed by column name or sequences in column order."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                vals = [r.get(c) for c in columns] if isinstance(r, dict) else list(r)
                if len(vals) != len(columns):
                    raise ValueError(f"row has {len(vals)} values for {len(columns)} columns")
                w.writerow([format_value(v) for v in vals])
    except OSError as e:
        raise OSError(e.errno, f"cannot write {path}: {e.strerror}") from None
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def prepare_out_dir(out_dir, force: bool, outputs=()) -> Path:
    """Create ``out_dir``; refuse if it already holds a manifest or any of ``outputs``."""
    out = Path(out_dir)
    if out.exists() and not out.is_dir():
        raise OutputExistsError(f"{out} exists and is not a directory")
    clash = [n for n in (MANIFEST_NAME, *outputs) if (out / n).exists()]
    if clash and not force:
        raise OutputExistsError(f"{out} already contains {', '.join(clash)}; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    return out


class RunManifest:
    """JSON manifest written before compute and rewritten when the run ends."""

    def __init__(self, out_dir, command: str, config: dict, workers: int = 1, seed: int = 0):
        self.path = Path(out_dir) / MANIFEST_NAME
        self.data = {
            "command": command,
            "config": dict(config),
            "version": __version__,
            "workers": workers,
            "seed": seed,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "pid": os.getpid(),
            "started": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "status": "running",
            "outputs": [],
        }
        self._write()

    def _write(self):
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(_jsonable(self.data), indent=2, sort_keys=True) + "\n")
        tmp.replace(self.path)

    def add_output(self, path):
        self.data["outputs"].append(Path(path).name)

    def update(self, **kw):
        self.data.update(kw)

    def finalize(self, status: str, exit_code: int, message: str = "", **extra):
        now = _dt.datetime.now(_dt.timezone.utc)
        started = _dt.datetime.fromisoformat(self.data["started"])
        self.data.update(status=status, exit_code=exit_code, message=message,
                         finished=now.isoformat(), wall_seconds=(now - started).total_seconds(), **extra)
        self._write()
