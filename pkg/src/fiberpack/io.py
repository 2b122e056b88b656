"""File formats and configuration.

System files carry a versioned self-describing text header followed by a
little-endian binary ball table, so saves round-trip byte for byte.
Configuration is flat ``section.key = value`` text; unknown keys are
rejected with field-level messages.  Analysis results are emitted as a
JSON record plus CSV rows carrying identical values, validated against a
published schema.
"""

from __future__ import annotations

import csv
import io as _io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .forces import ForceParams
from .generation import FiberSystem, GenerationConfig
from .geometry import Window
from .packing import PackingParams

ENGINE_VERSION = "0.1.0"

_BALL_DTYPE = np.dtype([
    ("fiber_id", "<i4"), ("chain_idx", "<i4"),
    ("x", "<f8", (3,)), ("mu", "<f8", (3,)), ("ref_angle", "<f8"),
])


class ConfigError(ValueError):
    """Invalid configuration; message names the offending field."""


# ---------------------------------------------------------------------------
# system files
# ---------------------------------------------------------------------------

def save_system(sys: FiberSystem, path: str | Path, phase: str = "generated",
                seed: int | None = None) -> None:
    buf = _io.BytesIO()
    lines = ["FIBERPACK SYSTEM v1"]
    w = sys.window
    lines.append(f"window = {w.w1!r} {w.w2!r} {w.w3!r}")
    lines.append(f"radius = {sys.r!r}")
    lines.append(f"chain_length = {sys.l}")
    lines.append(f"n_fibers = {sys.n_fibers}")
    lines.append(f"phase = {phase}")
    if seed is not None:
        lines.append(f"seed = {seed}")
    for k in sorted(sys.meta):
        lines.append(f"meta.{k} = {json.dumps(sys.meta[k], sort_keys=True)}")
    lines.append(f"balls = {sys.n_balls}")
    lines.append("end_header")
    buf.write(("\n".join(lines) + "\n").encode())
    table = np.empty(sys.n_balls, dtype=_BALL_DTYPE)
    table["fiber_id"] = sys.fiber_id
    table["chain_idx"] = sys.chain_idx
    table["x"] = sys.x
    table["mu"] = sys.mu
    table["ref_angle"] = sys.ref_angle
    buf.write(table.tobytes())
    Path(path).write_bytes(buf.getvalue())


def load_system(path: str | Path) -> tuple[FiberSystem, dict]:
    raw = Path(path).read_bytes()
    nl = raw.index(b"end_header\n") + len(b"end_header\n")
    header = raw[:nl].decode().splitlines()
    if header[0] != "FIBERPACK SYSTEM v1":
        raise ValueError(f"not a system file: {path}")
    info: dict = {"meta": {}}
    for line in header[1:-1]:
        key, _, val = line.partition(" = ")
        if key.startswith("meta."):
            info["meta"][key[5:]] = json.loads(val)
        else:
            info[key] = val
    n_balls = int(info["balls"])
    table = np.frombuffer(raw[nl:], dtype=_BALL_DTYPE, count=n_balls)
    wvals = [float(v) for v in info["window"].split()]
    sys = FiberSystem(
        window=Window(*wvals),
        r=float(info["radius"]),
        l=int(info["chain_length"]),
        x=table["x"].astype(np.float64).copy(),
        mu=table["mu"].astype(np.float64).copy(),
        fiber_id=table["fiber_id"].astype(np.int32).copy(),
        chain_idx=table["chain_idx"].astype(np.int32).copy(),
        ref_angle=table["ref_angle"].astype(np.float64).copy(),
        meta=info["meta"],
    )
    extra = {"phase": info.get("phase", "generated")}
    if "seed" in info:
        extra["seed"] = int(info["seed"])
    return sys, extra


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_SCHEMA: dict[str, tuple] = {
    # key: (type, default);  type one of int/float/str/bool, or
    # ("list", elem_type);  REQUIRED = no default
    "seed": (int, 0),
    "window": (("list", float), None),
    "generation.volume_fraction": (float, None),
    "generation.n_fibers": (int, None),
    "generation.fiber_length": (float, None),
    "generation.chain_length": (int, None),
    "generation.radius": (float, 2.0),
    "generation.beta": (float, 1.0),
    "generation.kappa1": (float, 10.0),
    "generation.kappa2": (float, 100.0),
    "generation.prepack_trials": (int, 10),
    "packing.tau": (float, 0.0),
    "packing.alpha_s": (float, 0.05),
    "packing.alpha_e": (float, 0.1),
    "packing.rho": (float, 0.5),
    "packing.rho_r": (float, 0.5),
    "packing.rho_c": (float, 0.5),
    "packing.d_c": (float, 0.0),
    "packing.exclusion_span": (int, 5),
    "packing.rel_decrease_limit": (float, 1e-5),
    "packing.max_iterations": (int, 1000),
    "packing.conflict_threshold": (float, 0.1),
    "packing.epsilon": (float, 0.5),
    "packing.epsilon_schedule": (("list", float), None),
    "packing.refresh_candidates_every": (int, 0),
    "analysis.counting_mode": (str, "component"),
    "analysis.distances": (("list", float), [0.0]),
    "analysis.with_toll": (bool, True),
    "sweep.beta": (("list", float), None),
    "sweep.epsilon": (("list", float), None),
    "sweep.n_realizations": (int, 1),
    "toll.beta": (("list", float), [0.1, 0.5, 1.0, 2.0, 3.0]),
    "toll.volume_fraction": (("list", float), [0.1, 0.2, 0.3]),
    "toll.aspect": (("list", float), [10.0, 30.0, 50.0]),
    "toll.radius": (float, 2.0),
    "rve.sizes": (("list", int), [48, 64, 96]),
    "rve.n_realizations": (int, 3),
    "rve.phi": (float, 0.01),
    "rve.variant": (str, "linear"),
    "output.dir": (str, None),
}


def _parse_value(key: str, text: str, typ):
    try:
        if isinstance(typ, tuple):
            elem = typ[1]
            return [elem(tok) for tok in text.split()]
        if typ is bool:
            low = text.strip().lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(text)
        return typ(text.strip())
    except ValueError as exc:
        raise ConfigError(f"field {key!r}: cannot parse {text!r}") from exc


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        vals: dict = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
            key, _, val = body.partition("=")
            key = key.strip()
            if key not in _SCHEMA:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in vals:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            vals[key] = _parse_value(key, val, _SCHEMA[key][0])
        cfg = cls(values=vals)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        return cls.from_text(Path(path).read_text())

    def get(self, key: str):
        if key in self.values:
            return self.values[key]
        if key not in _SCHEMA:
            raise KeyError(key)
        return _SCHEMA[key][1]

    def set(self, key: str, value) -> None:
        if key not in _SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        self.values[key] = value

    def validate(self) -> None:
        if self.get("window") is None:
            raise ConfigError("field 'window': required (1 or 3 edge lengths)")
        w = self.get("window")
        if len(w) not in (1, 3) or any(v <= 0 for v in w):
            raise ConfigError("field 'window': need 1 or 3 positive lengths")
        if (self.get("generation.volume_fraction") is None) == \
                (self.get("generation.n_fibers") is None):
            raise ConfigError("exactly one of generation.volume_fraction / "
                              "generation.n_fibers is required")
        if (self.get("generation.fiber_length") is None) == \
                (self.get("generation.chain_length") is None):
            raise ConfigError("exactly one of generation.fiber_length / "
                              "generation.chain_length is required")
        if self.get("analysis.counting_mode") not in ("component", "pairwise"):
            raise ConfigError("field 'analysis.counting_mode': must be "
                              "component or pairwise")

    # --- derived objects ---------------------------------------------------

    def window(self) -> Window:
        w = self.get("window")
        return Window.cube(w[0]) if len(w) == 1 else Window(*w)

    def generation_config(self) -> GenerationConfig:
        from .generation import chain_length_for, fiber_count_for_volume_fraction
        r = self.get("generation.radius")
        l = self.get("generation.chain_length")
        if l is None:
            l = chain_length_for(self.get("generation.fiber_length"), r)
        n = self.get("generation.n_fibers")
        if n is None:
            n = fiber_count_for_volume_fraction(
                self.get("generation.volume_fraction"), self.window(), l, r)
        return GenerationConfig(
            n_fibers=n, chain_length=l, radius=r,
            beta=self.get("generation.beta"),
            kappa1=self.get("generation.kappa1"),
            kappa2=self.get("generation.kappa2"),
            prepack_trials=self.get("generation.prepack_trials"),
        )

    def packing_params(self) -> PackingParams:
        fp = ForceParams(
            tau=self.get("packing.tau"),
            alpha_s=self.get("packing.alpha_s"),
            alpha_e=self.get("packing.alpha_e"),
            rho=self.get("packing.rho"),
            rho_R=self.get("packing.rho_r"),
            rho_C=self.get("packing.rho_c"),
            d_c=self.get("packing.d_c"),
            exclusion_span=self.get("packing.exclusion_span"),
        )
        return PackingParams(
            force_params=fp,
            rel_decrease_limit=self.get("packing.rel_decrease_limit"),
            max_iterations=self.get("packing.max_iterations"),
            conflict_threshold=self.get("packing.conflict_threshold"),
            epsilon=self.get("packing.epsilon"),
            epsilon_schedule=self.get("packing.epsilon_schedule"),
            refresh_candidates_every=self.get("packing.refresh_candidates_every"),
        )

    def echo(self) -> dict:
        out = {}
        for key, (_, default) in sorted(_SCHEMA.items()):
            val = self.values.get(key, default)
            if val is not None:
                out[key] = val
        return out


# ---------------------------------------------------------------------------
# result records
# ---------------------------------------------------------------------------

RECORD_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "engine_version", "seed", "phase", "window",
                 "radius", "chain_length", "n_fibers", "n_balls",
                 "counting_mode", "parameters", "contacts"],
    "properties": {
        "schema_version": {"const": 1},
        "engine_version": {"type": "string"},
        "seed": {"type": "integer"},
        "phase": {"enum": ["generated", "aj", "contact"]},
        "window": {"type": "array", "items": {"type": "number"},
                   "minItems": 3, "maxItems": 3},
        "radius": {"type": "number", "exclusiveMinimum": 0},
        "chain_length": {"type": "integer", "minimum": 1},
        "n_fibers": {"type": "integer", "minimum": 0},
        "n_balls": {"type": "integer", "minimum": 0},
        "counting_mode": {"enum": ["component", "pairwise"]},
        "parameters": {"type": "object"},
        "beta_hat": {"type": ["number", "null"]},
        "mean_turning_angle": {"type": ["number", "null"]},
        "packing": {"type": ["object", "null"]},
        "toll": {"type": ["object", "null"]},
        "contacts": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["distance", "n_contacts", "n_clots", "lambda_c",
                             "lambda_cF", "lambda_cl", "lambda_clF",
                             "per_fiber_contact_hist", "per_fiber_clot_hist"],
                "properties": {
                    "distance": {"type": "number"},
                    "n_contacts": {"type": "integer"},
                    "n_clots": {"type": "integer"},
                    "lambda_c": {"type": "number"},
                    "lambda_cF": {"type": "number"},
                    "lambda_cl": {"type": "number"},
                    "lambda_clF": {"type": "number"},
                    "per_fiber_contact_hist": {"type": "array"},
                    "per_fiber_clot_hist": {"type": "array"},
                    "component_fiber_multiplicities": {"type": "object"},
                    "poisson_mean": {"type": ["number", "null"]},
                    "poisson_chi2": {"type": ["number", "null"]},
                    "poisson_p": {"type": ["number", "null"]},
                },
            },
        },
    },
}

CSV_COLUMNS = [
    "seed", "phase", "window_1", "window_2", "window_3", "radius",
    "chain_length", "n_fibers", "n_balls", "counting_mode", "distance",
    "n_contacts", "n_clots", "lambda_c", "lambda_cF", "lambda_cl",
    "lambda_clF", "poisson_mean", "poisson_chi2", "poisson_p", "beta_hat",
    "mean_turning_angle", "toll_lambda_cF", "toll_lambda_cF_pair",
    "toll_lambda_c", "toll_lambda_c_pair", "toll_f_psi", "toll_g_psi",
    "iterations", "wall_time", "per_fiber_contact_hist",
    "per_fiber_clot_hist", "parameters",
]


def validate_record(record: dict) -> None:
    import jsonschema
    jsonschema.validate(record, RECORD_SCHEMA)


def record_to_csv_rows(record: dict) -> list[dict]:
    rows = []
    toll = record.get("toll") or {}
    packing = record.get("packing") or {}
    for c in record["contacts"]:
        rows.append({
            "seed": record["seed"], "phase": record["phase"],
            "window_1": record["window"][0], "window_2": record["window"][1],
            "window_3": record["window"][2], "radius": record["radius"],
            "chain_length": record["chain_length"],
            "n_fibers": record["n_fibers"], "n_balls": record["n_balls"],
            "counting_mode": record["counting_mode"],
            "distance": c["distance"], "n_contacts": c["n_contacts"],
            "n_clots": c["n_clots"], "lambda_c": c["lambda_c"],
            "lambda_cF": c["lambda_cF"], "lambda_cl": c["lambda_cl"],
            "lambda_clF": c["lambda_clF"],
            "poisson_mean": c.get("poisson_mean"),
            "poisson_chi2": c.get("poisson_chi2"),
            "poisson_p": c.get("poisson_p"),
            "beta_hat": record.get("beta_hat"),
            "mean_turning_angle": record.get("mean_turning_angle"),
            "toll_lambda_cF": toll.get("lambda_cF"),
            "toll_lambda_cF_pair": toll.get("lambda_cF_pair"),
            "toll_lambda_c": toll.get("lambda_c"),
            "toll_lambda_c_pair": toll.get("lambda_c_pair"),
            "toll_f_psi": toll.get("f_psi"), "toll_g_psi": toll.get("g_psi"),
            "iterations": packing.get("iterations"),
            "wall_time": packing.get("wall_time"),
            "per_fiber_contact_hist": json.dumps(c["per_fiber_contact_hist"]),
            "per_fiber_clot_hist": json.dumps(c["per_fiber_clot_hist"]),
            "parameters": json.dumps(record["parameters"], sort_keys=True),
        })
    return rows


def write_records_csv(path: str | Path, records: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        wr.writeheader()
        for rec in records:
            for row in record_to_csv_rows(rec):
                wr.writerow(row)


def write_record_json(path: str | Path, record: dict) -> None:
    validate_record(record)
    Path(path).write_text(json.dumps(record, indent=1, sort_keys=True) + "\n")


def read_record_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
