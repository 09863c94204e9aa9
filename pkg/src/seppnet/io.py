"""File formats: counts CSV, model JSON, event CSV, run manifests."""

import csv
import json
import time
from pathlib import Path

import numpy as np

from seppnet.model import (
    BasisSet,
    Bounds,
    CountMatrix,
    InfluenceModel,
    InputFormatError,
    Saturation,
)
from seppnet.hawkes import EventLog

FLOAT_FMT = "%.17g"


def write_counts_csv(path, X):
    counts = X.counts if isinstance(X, CountMatrix) else np.asarray(X)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"node_{m}" for m in range(counts.shape[1])])
        writer.writerows(counts.tolist())


def read_counts_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputFormatError("E_COUNTS_EMPTY", "counts file is empty")
        if not header or not header[0].startswith("node_"):
            raise InputFormatError("E_COUNTS_HEADER", "expected a node_* header row")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InputFormatError(
                    "E_COUNTS_SHAPE", f"line {lineno}: expected {len(header)} columns"
                )
            try:
                vals = [int(v) for v in row]
            except ValueError:
                raise InputFormatError(
                    "E_COUNTS_NONINTEGER", f"line {lineno}: counts must be integers"
                )
            if any(v < 0 for v in vals):
                raise InputFormatError(
                    "E_COUNTS_NEGATIVE", f"line {lineno}: counts must be nonnegative"
                )
            rows.append(vals)
    if not rows:
        raise InputFormatError("E_COUNTS_EMPTY", "counts file has no data rows")
    return CountMatrix(np.asarray(rows, dtype=np.int64))


def basis_to_dict(basis):
    if basis.kind == "geometric":
        return {"kind": "geometric", "alpha": basis.alpha}
    if basis.kind == "lags":
        return {"kind": "lags", "p": basis.p}
    return {"kind": "table", "values": basis.table.tolist()}


def basis_from_dict(d):
    if d["kind"] == "geometric":
        return BasisSet.geometric(d["alpha"])
    if d["kind"] == "lags":
        return BasisSet.lags(d["p"])
    if d["kind"] == "table":
        return BasisSet.from_table(d["values"])
    raise InputFormatError("E_MODEL_BASIS", f"unknown basis kind {d.get('kind')!r}")


def model_to_dict(model, extra=None):
    d = {
        "nu": model.nu.tolist(),
        "A": model.A.tolist(),
        "basis": basis_to_dict(model.basis),
        "saturation": {"kind": model.saturation.kind, "u": model.saturation.u},
        "bounds": {
            "a_max": model.bounds.a_max,
            "a_min": model.bounds.a_min,
            "nu_min": model.bounds.nu_min,
            "nu_max": model.bounds.nu_max,
        },
    }
    if extra:
        d.update(extra)
    return d


def model_from_dict(d):
    try:
        sat_d = d.get("saturation", {"kind": "clip", "u": 6})
        if sat_d.get("kind", "clip") != "clip":
            raise InputFormatError(
                "E_MODEL_SATURATION", "only the clip saturation is serializable"
            )
        return InfluenceModel(
            nu=np.asarray(d["nu"], dtype=float),
            A=np.asarray(d["A"], dtype=float),
            basis=basis_from_dict(d["basis"]),
            saturation=Saturation.clip(sat_d["u"]),
            bounds=Bounds(**d["bounds"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, InputFormatError):
            raise
        raise InputFormatError("E_MODEL_FORMAT", f"bad model JSON: {e}") from e


def write_model_json(path, model, extra=None):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model, extra), fh, indent=2)
        fh.write("\n")


def read_model_json(path):
    try:
        with open(path) as fh:
            return model_from_dict(json.load(fh))
    except json.JSONDecodeError as e:
        raise InputFormatError("E_MODEL_JSON", f"invalid JSON: {e}") from e


def read_events_csv(path, M, horizon=None):
    events = []
    max_t = 0.0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["time", "node"]:
            raise InputFormatError("E_EVENTS_HEADER", "expected header 'time,node'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                tau = float(row[0])
                node = int(row[1])
            except (ValueError, IndexError):
                raise InputFormatError(
                    "E_EVENTS_FORMAT", f"line {lineno}: expected time,node"
                )
            events.append((tau, node))
            max_t = max(max_t, tau)
    if horizon is None:
        horizon = max_t + 1e-9 if events else 1.0
    return EventLog(events=tuple(events), M=M, horizon=horizon)


def write_events_csv(path, log):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "node"])
        for tau, node in log.events:
            writer.writerow([FLOAT_FMT % tau, node])


def write_table_csv(path, rows, fieldnames):
    """Dict rows to CSV with lossless float formatting."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            out = {}
            for key in fieldnames:
                val = row.get(key, "")
                if isinstance(val, float):
                    val = FLOAT_FMT % val
                out[key] = val
            writer.writerow(out)


def write_manifest(out_path, subcommand, config, seed, inputs, outputs, wall_clock):
    """JSON sidecar recording how an output was produced."""
    from seppnet import __version__

    manifest = {
        "subcommand": subcommand,
        "config": config,
        "seed": seed,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "wall_clock_s": wall_clock,
        "version": __version__,
    }
    path = Path(str(out_path) + ".manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return path
