"""CSV, feature-report and manifest writers.

Floats are written with 17 significant digits so reruns are bit-identical.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from . import __version__


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _header(meta: dict) -> str:
    return "# " + json.dumps(meta, sort_keys=True, default=str) + "\n"


def _table(meta: dict, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(_header(meta))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def ladder_csv(ladder, spec=None) -> str:
    meta = {"method": ladder.method.value, "p": ladder.p, "delta": ladder.delta,
            "spec": spec.as_dict() if spec is not None else None}
    return _table(meta, ["n", "eigen_index", "energy", "nq_expect", "window_fallback"], ladder.entries())


def curve_csv(curve, extra: dict | None = None) -> str:
    meta = dict(curve.provenance)
    meta.update(extra or {})
    return _table(meta, ["n", "value"], zip(curve.n, curve.values))


def trajectory_csv(traj, extra: dict | None = None) -> str:
    meta = {"frame": traj.frame.value, **traj.meta, **(extra or {})}
    rows = zip(traj.t, traj.alpha.real, traj.alpha.imag, traj.nq, traj.photon_lab)
    return _table(meta, ["t", "re_alpha", "im_alpha", "nq", "photon_lab"], rows)


def feature_report(features) -> str:
    return "".join(f"{feat}\n" for feat in features)


def manifest_text(entries: dict) -> str:
    """Line-oriented ``key = value`` text; nested dicts flatten to dotted keys."""
    lines = [f"tool = ladderlab {__version__}"]

    def walk(prefix, value):
        if isinstance(value, dict):
            for k in sorted(value):
                walk(f"{prefix}.{k}" if prefix else str(k), value[k])
        else:
            if isinstance(value, float):
                value = fmt(value)
            elif isinstance(value, (list, tuple)):
                value = json.dumps(value, default=str)
            lines.append(f"{prefix} = {value}")

    walk("", entries)
    return "\n".join(lines) + "\n"


def read_table(text: str):
    """Parse a CSV written above back into (meta, columns, float array)."""
    lines = text.splitlines()
    meta = json.loads(lines[0][2:]) if lines and lines[0].startswith("# ") else {}
    body = lines[1:] if meta else lines
    reader = csv.reader(body)
    columns = next(reader)
    data = np.array([[float(v) for v in row] for row in reader], dtype=float)
    return meta, columns, data


def write(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path
