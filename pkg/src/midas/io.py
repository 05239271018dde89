"""CSV and JSON-lines artifacts.

All CSVs are UTF-8 with a header row, ``\\n`` line endings and ``.`` as
decimal separator. Floats are written with ``repr`` so a dump round-trips
exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .metrics import WeightedSampleSet

__all__ = [
    "write_particle_dump",
    "read_particle_dump",
    "write_points",
    "write_weighted_samples",
    "read_weighted_samples",
    "append_jsonl",
    "write_csv",
    "read_csv",
]


def _f(v) -> str:
    return repr(float(v))


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return list(reader)


def write_particle_dump(path, store):
    """``index,x_0..x_{d-1},raw_weight,eff_weight,bandwidth`` per particle.

    ``eff_weight`` is ``W_{i,N}`` at the last step of the run. A
    ``log_raw_weight`` column is appended so weights that under- or
    overflow as plain floats survive the round trip.
    """
    d = store.dim
    header = ["index"] + [f"x_{j}" for j in range(d)] + [
        "raw_weight",
        "eff_weight",
        "bandwidth",
        "log_raw_weight",
    ]
    x = store.positions
    logw = store.log_raw_weights
    eff = store.effective_weights()
    b = store.bandwidths
    with np.errstate(over="ignore"):
        raw = np.exp(logw)

    def rows():
        for i in range(len(store)):
            yield [str(i)] + [_f(v) for v in x[i]] + [_f(raw[i]), _f(eff[i]), _f(b[i]), _f(logw[i])]

    write_csv(path, header, rows())


def read_particle_dump(path):
    """Return a dict of arrays: positions, raw_weight, eff_weight, bandwidth, log_raw_weight."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(c) for c in row] for row in reader])
    xcols = [k for k, h in enumerate(header) if h.startswith("x_")]
    col = {h: k for k, h in enumerate(header)}
    out = {
        "positions": data[:, xcols],
        "raw_weight": data[:, col["raw_weight"]],
        "eff_weight": data[:, col["eff_weight"]],
        "bandwidth": data[:, col["bandwidth"]],
    }
    if "log_raw_weight" in col:
        out["log_raw_weight"] = data[:, col["log_raw_weight"]]
    else:
        with np.errstate(divide="ignore"):
            out["log_raw_weight"] = np.log(out["raw_weight"])
    return out


def write_points(path, points):
    """Unweighted points as ``x_0,...,x_{d-1}``."""
    points = np.atleast_2d(points)
    header = [f"x_{j}" for j in range(points.shape[1])]
    write_csv(path, header, ([_f(v) for v in row] for row in points))


def write_weighted_samples(path, samples: WeightedSampleSet):
    """Same schema as particle dumps; ``eff_weight`` repeats the normalized weight."""
    d = samples.dim
    header = ["index"] + [f"x_{j}" for j in range(d)] + ["raw_weight", "eff_weight", "bandwidth"]
    p = samples.normalized_weights

    def rows():
        for i in range(samples.points.shape[0]):
            yield [str(i)] + [_f(v) for v in samples.points[i]] + [
                _f(samples.weights[i]),
                _f(p[i]),
                "0.0",
            ]

    write_csv(path, header, rows())


def read_weighted_samples(path, weights: str = "raw") -> WeightedSampleSet:
    dump = read_particle_dump(path)
    if weights == "raw":
        return WeightedSampleSet.from_log_weights(dump["positions"], dump["log_raw_weight"])
    if weights == "effective":
        return WeightedSampleSet(dump["positions"], dump["eff_weight"])
    raise ValueError("weights must be 'raw' or 'effective'")


def append_jsonl(path, record: dict):
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(record, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")
