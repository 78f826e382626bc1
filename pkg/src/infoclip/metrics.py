"""Per-step training metrics as JSON-lines plus a CSV with the same columns."""

from __future__ import annotations

import json
import math
from pathlib import Path

from .bench import TrainReport
from .tensorfile import atomic_write_bytes

COLUMNS = ("step", "task", "lc", "ld", "total", "mi_ts")


def fmt(x: float) -> str:
    """12 significant digits."""
    return f"{x:.12g}"


def _rows(report: TrainReport):
    for rec in report.records:
        b = rec.losses
        yield (str(rec.step), fmt(b.task), fmt(b.compression), fmt(b.distillation), fmt(b.total), fmt(rec.mi_ts))


def emit_metrics(report: TrainReport, path, csv_path=None):
    """Write ``path`` (JSON-lines) and ``csv_path`` (default: same stem, ``.csv``)."""
    path = Path(path)
    csv_path = Path(csv_path) if csv_path is not None else path.with_suffix(".csv")
    jsonl, csv = [], [",".join(COLUMNS)]
    for row in _rows(report):
        jsonl.append("{" + ", ".join(f'"{k}": {v}' for k, v in zip(COLUMNS, row)) + "}")
        csv.append(",".join(row))
    atomic_write_bytes(path, "".join(line + "\n" for line in jsonl).encode())
    atomic_write_bytes(csv_path, ("\n".join(csv) + "\n").encode())
    return path, csv_path


def _clean(obj):
    if isinstance(obj, float):
        return None if math.isnan(obj) else obj
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def summary_dict(report: TrainReport) -> dict:
    """Run-level results. Wall-clock time is left out so the file is reproducible."""
    return _clean({
        "steps": len(report.records),
        "initial_mi": report.initial_mi,
        "final_mi": report.final_mi,
        "initial_metrics": report.initial_metrics,
        "final_metrics": report.final_metrics,
    })


def write_json(obj, path):
    atomic_write_bytes(path, (json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n").encode())
