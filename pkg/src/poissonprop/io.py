"""CSV / JSON serialization with provenance sidecars.

Floats are written with ``repr`` (shortest round-trip form), so files are
byte-identical whenever the numbers are.
"""

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .geometry import PointPattern2D
from .propagation import PropagationProcess


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        return repr(x)
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def config_hash(config):
    blob = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def write_sidecar(path, meta):
    path = Path(path)
    side = path.with_name(path.name + ".meta.json")
    side.write_text(dumps({"toolkit_version": __version__, **meta}))
    return side


def write_csv(path, header, rows, meta=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    if meta is not None:
        write_sidecar(path, meta)
    return path


def write_json(path, obj, meta=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    if meta is not None:
        write_sidecar(path, meta)
    return path


def write_pattern(path, pattern, meta=None):
    rows = pattern.points.tolist()
    return write_csv(path, ["x", "y"], rows, {**(meta or {}), "provenance": pattern.provenance,
                                              "r_max": pattern.r_max})


def read_pattern(path, r_max=None):
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    side = path.with_name(path.name + ".meta.json")
    prov = {}
    if side.exists():
        meta = json.loads(side.read_text())
        prov = meta.get("provenance", {})
        r_max = r_max or meta.get("r_max")
    pts = data.reshape(-1, 2)
    if r_max is None:
        r_max = float(np.hypot(pts[:, 0], pts[:, 1]).max()) if len(pts) else 1.0
    return PointPattern2D(pts, r_max, prov)


def write_propagation(path, process, meta=None):
    return write_csv(path, ["y"], ([v] for v in process.values),
                     {**(meta or {}), "tau": process.tau, "provenance": process.provenance})


def read_propagation(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=1)
    return PropagationProcess(np.atleast_1d(data))


def write_batch(path, batch, meta=None):
    """Per-replication point lists in long form ``rep,y``; an empty replication
    is a row with an empty ``y``."""
    rows = []
    for i, vals in enumerate(batch.values):
        if len(vals) == 0:
            rows.append([i, ""])
        rows.extend([i, v] for v in vals)
    return write_csv(path, ["rep", "y"], rows, {**(meta or {}), "tau": batch.tau, "n_reps": batch.n_reps})


def read_batch(path, tau, n_reps=None):
    from .propagation import ReplicationBatch

    per = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"rep", "y"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected header 'rep,y'")
        for row in reader:
            rep = int(row["rep"])
            lst = per.setdefault(rep, [])
            if row["y"].strip():
                lst.append(float(row["y"]))
    n = n_reps if n_reps is not None else (max(per) + 1 if per else 0)
    values = [np.sort(np.array([v for v in per.get(i, []) if v <= tau])) for i in range(n)]
    return ReplicationBatch(tau, values, {"source": str(path)})
