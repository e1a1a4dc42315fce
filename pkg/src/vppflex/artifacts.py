"""Plot-ready result files: point tables (CSV) and JSON documents."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .feasibility import ForResult
from .flexibility import FcasEnvelope, FxorResult

FOR_COLUMNS = ("sample_index", "p_kw", "q_kvar", "feasible", "violation_kind")
FXOR_BASE_COLUMNS = ("sample_index", "p_kw", "q_kvar", "min_time_s")


def _num(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def _tau_label(tau: float) -> str:
    return f"in_{tau:g}s"


def for_points_csv(result: ForResult) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(FOR_COLUMNS)
    for i in range(len(result.violation_kind)):
        kind = result.violation_kind[i]
        w.writerow([i, _num(result.sample_p_kw[i]), _num(result.sample_q_kvar[i]),
                    "true" if kind == "" else "false", kind])
    return out.getvalue()


def read_for_points(text: str) -> list[dict]:
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        rows.append({
            "sample_index": int(row["sample_index"]),
            "p_kw": float(row["p_kw"]) if row["p_kw"] else math.nan,
            "q_kvar": float(row["q_kvar"]) if row["q_kvar"] else math.nan,
            "feasible": row["feasible"] == "true",
            "violation_kind": row["violation_kind"],
        })
    return rows


def fxor_points_csv(fxor: FxorResult) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(FXOR_BASE_COLUMNS + tuple(_tau_label(t) for t in fxor.horizons_s))
    member = fxor.membership
    for k in range(len(fxor.p_kw)):
        w.writerow([int(fxor.sample_index[k]), _num(fxor.p_kw[k]), _num(fxor.q_kvar[k]),
                    _num(fxor.min_time_s[k])] + [int(b) for b in member[k]])
    return out.getvalue()


def read_fxor_points(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    taus = [c for c in reader.fieldnames if c.startswith("in_")]
    rows = []
    for row in reader:
        rows.append({
            "sample_index": int(row["sample_index"]),
            "p_kw": float(row["p_kw"]),
            "q_kvar": float(row["q_kvar"]),
            "min_time_s": float(row["min_time_s"]),
            "members": {c: row[c] == "1" for c in taus},
        })
    return rows


def fxor_cells_csv(fxor: FxorResult, cell_kw: float, cell_kvar: float) -> str:
    cp, cq, t = fxor.cell_min_times(cell_kw, cell_kvar)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("cell_p_kw", "cell_q_kvar", "min_time_s"))
    for a, b, c in zip(cp, cq, t):
        w.writerow([_num(a), _num(b), _num(c)])
    return out.getvalue()


def fcas_points_csv(fxor: FxorResult, envelope: FcasEnvelope) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    labels = [f"{s.window}_{s.direction}" for s in envelope.services]
    w.writerow(("sample_index", "p_kw", "q_kvar", "delta_p_kw", "delta_q_kvar", *labels))
    n = len(fxor.p_kw)
    flags = np.zeros((n, len(envelope.services)), dtype=int)
    for j, s in enumerate(envelope.services):
        flags[s.members, j] = 1
    d0, d1 = envelope.dispatch
    for k in range(n):
        w.writerow([int(fxor.sample_index[k]), _num(fxor.p_kw[k]), _num(fxor.q_kvar[k]),
                    _num(fxor.p_kw[k] - d0), _num(fxor.q_kvar[k] - d1), *flags[k].tolist()])
    return out.getvalue()


def fcas_summary(envelope: FcasEnvelope, fxor: FxorResult, dispatch_in_hull: bool) -> dict:
    return {
        "dispatch_kw_kvar": list(envelope.dispatch),
        "requested_dispatch_kw_kvar": list(fxor.requested_dispatch) if fxor.requested_dispatch else None,
        "dispatch_sample_index": int(fxor.sample_index[fxor.dispatch_position]),
        "dispatch_in_for_hull": bool(dispatch_in_hull),
        "capacities_kw": envelope.capacities(),
    }


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def write_json(path: Path, doc) -> Path:
    return write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
