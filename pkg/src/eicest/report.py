"""Report assembly and emission (JSON or CSV).

A report keeps three things apart: ``values`` (numbers produced by the
computation), ``verdicts`` (pass/fail judged against tolerances) and
metadata (timestamps, versions, timings).  Values and verdicts are written
deterministically; metadata always goes to a ``<out>.meta.json`` sidecar so
reruns with the same config and seed give byte-identical reports.
"""
from __future__ import annotations

import csv
import io
import json
import math
import platform
import time
from pathlib import Path

import numpy as np

__all__ = ["clean", "dumps", "write_report", "write_meta", "flatten"]


def clean(obj):
    """Convert numpy scalars/arrays to plain Python; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, one-space indent, no NaN literals."""
    return json.dumps(clean(obj), sort_keys=True, indent=1)


def flatten(record: dict, prefix: str = "") -> dict:
    """Flatten nested dicts with dotted keys; lists are JSON-encoded."""
    out = {}
    for k, v in record.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = json.dumps(clean(v), sort_keys=True)
        else:
            out[key] = clean(v)
    return out


def _csv_text(rows: list) -> str:
    flat = [flatten(r) for r in rows]
    cols = sorted({c for r in flat for c in r})
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in flat:
        w.writerow(r)
    return buf.getvalue()


def write_report(path, command: str, config: dict, values: dict, verdicts: dict,
                 fmt: str = "json") -> list:
    """Write the report; returns the list of files written.

    JSON: one document ``{"command", "config", "values", "verdicts"}``.
    CSV: ``values["records"]`` as the main table, ``<out>.verdicts.csv`` with
    one check per row and ``<out>.config.json`` with the resolved config.
    """
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path.write_text(dumps({"command": command, "config": config, "values": values,
                               "verdicts": verdicts}))
        return [str(path)]
    records = values.get("records", [])
    path.write_text(_csv_text(records))
    checks = verdicts.get("checks", [])
    summary = [{"check": "overall", "pass": verdicts.get("pass")}]
    vpath = Path(str(path) + ".verdicts.csv")
    vpath.write_text(_csv_text(summary + checks))
    cpath = Path(str(path) + ".config.json")
    cpath.write_text(dumps({"command": command, "config": config}))
    return [str(path), str(vpath), str(cpath)]


def write_meta(path, **extra) -> str:
    from . import __version__

    meta = {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"), "version": __version__,
            "python": platform.python_version(), "numpy": np.__version__}
    meta.update(extra)
    out = Path(str(path) + ".meta.json")
    out.write_text(dumps(meta))
    return str(out)
