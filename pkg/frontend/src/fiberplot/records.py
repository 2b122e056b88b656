"""Loading of fiberpack output records.

The plotting layer consumes only the engine's published file surfaces:
sweep ``table.csv`` (one row per analyzed system and closeness distance),
per-record JSON files, and the RVE study CSVs.  No statistic is computed
here beyond grouping and averaging what the engine already emitted.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

_NUMERIC = {
    "seed", "window_1", "window_2", "window_3", "radius", "chain_length",
    "n_fibers", "n_balls", "distance", "n_contacts", "n_clots", "lambda_c",
    "lambda_cF", "lambda_cl", "lambda_clF", "poisson_mean", "poisson_chi2",
    "poisson_p", "beta_hat", "mean_turning_angle", "toll_lambda_cF",
    "toll_lambda_cF_pair", "toll_lambda_c", "toll_lambda_c_pair",
    "toll_f_psi", "toll_g_psi", "iterations", "wall_time",
}


def load_table(path: str | Path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        for raw in csv.DictReader(fh):
            row = {}
            for k, v in raw.items():
                if v is None or v == "":
                    row[k] = None
                elif k in _NUMERIC:
                    row[k] = float(v)
                elif k.startswith("per_fiber") or k == "parameters":
                    row[k] = json.loads(v)
                else:
                    row[k] = v
            rows.append(row)
    return rows


def load_record_jsons(directory: str | Path) -> list[dict]:
    out = []
    for p in sorted(Path(directory).glob("*.json")):
        out.append(json.loads(p.read_text()))
    return out


def sweep_key(row: dict) -> tuple:
    params = row.get("parameters") or {}
    beta = params.get("generation.beta")
    eps = params.get("packing.epsilon")
    return (beta, eps)


def group_rows(rows, keys):
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        k = tuple(r.get(k2) for k2 in keys)
        groups.setdefault(k, []).append(r)
    return groups
