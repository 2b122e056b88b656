"""Command-line surface.

Subcommands: generate, pack, analyze, sweep, toll, rve, export-voxels.
Exit codes: 0 success, 2 invalid configuration (field-level message),
3 non-finite force during packing (names the ball).
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import os
import sys as _sys
import time
from pathlib import Path

import numpy as np

from . import analysis, io, rve as rve_tools, toll as toll_mod, voxels
from .distributions import SchladitzParams
from .generation import fiber_length, generate
from .geometry import RngState
from .io import ConfigError, RunConfig
from .packing import NonFiniteForceError, pack_aj, pack_contact


def _derive_seed(base: int, *path: int) -> int:
    ss = np.random.SeedSequence(entropy=base, spawn_key=tuple(path))
    return int(ss.generate_state(1, dtype=np.uint64)[0] % (2 ** 63))


def _analyze_system(sys, cfg: RunConfig, seed: int, phase: str,
                    packing_info: dict | None = None) -> dict:
    mode = cfg.get("analysis.counting_mode")
    dists = cfg.get("analysis.distances")
    dirs = analysis.main_directions(sys)
    beta_hat = analysis.estimate_beta(dirs) if dirs.shape[0] >= 2 else None
    contacts = []
    for d in dists:
        st = analysis.analyze(sys, d, mode)
        try:
            fit = analysis.fit_poisson(st.per_fiber_contacts)
            pm, pc, pp = fit.mean, fit.chi2, fit.p_value
        except ValueError:
            pm = pc = pp = None
        contacts.append({
            "distance": d, "n_contacts": st.n_contacts, "n_clots": st.n_clots,
            "lambda_c": st.lambda_c, "lambda_cF": st.lambda_cF,
            "lambda_cl": st.lambda_cl, "lambda_clF": st.lambda_clF,
            "per_fiber_contact_hist": st.per_fiber_contacts.tolist(),
            "per_fiber_clot_hist": st.per_fiber_clots.tolist(),
            "component_fiber_multiplicities":
                {str(k): v for k, v in sorted(st.component_fiber_multiplicities.items())},
            "poisson_mean": pm, "poisson_chi2": pc, "poisson_p": pp,
        })
    toll_block = None
    if cfg.get("analysis.with_toll") and sys.n_fibers > 0:
        ell = fiber_length(sys.l, sys.r)
        lam = sys.n_fibers / sys.window.volume
        beta = sys.meta.get("beta", cfg.get("generation.beta"))
        res = toll_mod.toll_intensities(toll_mod.TollInput(
            lam, sys.r, ell, SchladitzParams(beta)))
        toll_block = {
            "lambda_F": lam, "fiber_length": ell, "beta": beta,
            "f_psi": res.f_psi, "g_psi": res.g_psi,
            "lambda_cF": res.lambda_cF, "lambda_c": res.lambda_c,
            "lambda_cF_pair": res.lambda_cF_pair,
            "lambda_c_pair": res.lambda_c_pair,
        }
    return {
        "schema_version": 1,
        "engine_version": io.ENGINE_VERSION,
        "seed": seed,
        "phase": phase,
        "window": list(sys.window.arr),
        "radius": sys.r,
        "chain_length": sys.l,
        "n_fibers": sys.n_fibers,
        "n_balls": sys.n_balls,
        "counting_mode": mode,
        "parameters": cfg.echo(),
        "beta_hat": beta_hat,
        "mean_turning_angle": analysis.mean_turning_angle(sys),
        "packing": packing_info,
        "toll": toll_block,
        "contacts": contacts,
    }


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    cfg = RunConfig.from_file(args.config)
    seed = args.seed if args.seed is not None else cfg.get("seed")
    sys = generate(cfg.generation_config(), cfg.window(), RngState(seed))
    io.save_system(sys, args.out, phase="generated", seed=seed)
    print(f"generated {sys.n_fibers} fibers ({sys.n_balls} balls) -> {args.out}")
    return 0


def cmd_pack(args) -> int:
    cfg = RunConfig.from_file(args.config)
    sys, extra = io.load_system(args.infile)
    seed = extra.get("seed", cfg.get("seed"))
    params = cfg.packing_params()
    t0 = time.perf_counter()
    if args.mode == "aj":
        sys, hist = pack_aj(sys, params, trace=args.trace)
        phase = "aj"
    else:
        all_hist = []
        if extra.get("phase") == "generated":
            sys, hist0 = pack_aj(sys, params)
            all_hist += hist0
        sys, hist1, _ = pack_contact(sys, params)
        hist = all_hist + hist1
        phase = "contact"
        if args.trace:
            from .packing import write_trace
            write_trace(args.trace, hist)
    io.save_system(sys, args.out, phase=phase, seed=seed)
    wall = time.perf_counter() - t0
    print(f"packed ({phase}) in {len(hist)} iterations, {wall:.2f} s -> {args.out}")
    return 0


def cmd_analyze(args) -> int:
    cfg = RunConfig.from_file(args.config)
    if args.counting_mode:
        cfg.set("analysis.counting_mode", args.counting_mode)
    sys, extra = io.load_system(args.infile)
    seed = extra.get("seed", cfg.get("seed"))
    record = _analyze_system(sys, cfg, seed, extra.get("phase", "generated"))
    out = Path(args.out)
    io.write_record_json(out, record)
    io.write_records_csv(out.with_suffix(".csv"), [record])
    print(f"analyzed {args.infile} -> {out} (+ .csv)")
    return 0


def _run_cell(task) -> list[str]:
    cfg_text, base_seed, cell_idx, real_idx, beta, eps, out_dir = task
    cfg = RunConfig.from_text(cfg_text)
    cfg.set("generation.beta", beta)
    cfg.set("packing.epsilon", eps)
    seed = _derive_seed(base_seed, cell_idx, real_idx)
    rng = RngState(seed)
    sys = generate(cfg.generation_config(), cfg.window(), rng)
    params = cfg.packing_params()
    written = []
    stem = f"cell{cell_idx:04d}_r{real_idx:03d}"
    rec = _analyze_system(sys, cfg, seed, "generated")
    rec["sweep"] = {"cell": cell_idx, "realization": real_idx,
                    "beta": beta, "epsilon": eps}
    p = Path(out_dir) / f"{stem}_generated.json"
    io.write_record_json(p, rec)
    written.append(str(p))

    t0 = time.perf_counter()
    sys, hist = pack_aj(sys, params)
    rec = _analyze_system(sys, cfg, seed, "aj",
                          {"iterations": len(hist),
                           "wall_time": time.perf_counter() - t0})
    rec["sweep"] = {"cell": cell_idx, "realization": real_idx,
                    "beta": beta, "epsilon": eps}
    p = Path(out_dir) / f"{stem}_aj.json"
    io.write_record_json(p, rec)
    written.append(str(p))

    t0 = time.perf_counter()
    sys, hist, _ = pack_contact(sys, params)
    rec = _analyze_system(sys, cfg, seed, "contact",
                          {"iterations": len(hist),
                           "wall_time": time.perf_counter() - t0})
    rec["sweep"] = {"cell": cell_idx, "realization": real_idx,
                    "beta": beta, "epsilon": eps}
    p = Path(out_dir) / f"{stem}_contact.json"
    io.write_record_json(p, rec)
    written.append(str(p))
    return written


def cmd_sweep(args) -> int:
    cfg = RunConfig.from_file(args.config)
    betas = cfg.get("sweep.beta") or [cfg.get("generation.beta")]
    epsilons = cfg.get("sweep.epsilon") or [cfg.get("packing.epsilon")]
    n_real = cfg.get("sweep.n_realizations")
    base_seed = args.seed if args.seed is not None else cfg.get("seed")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg_text = Path(args.config).read_text()

    tasks = []
    cells = list(itertools.product(betas, epsilons))
    for ci, (beta, eps) in enumerate(cells):
        for ri in range(n_real):
            stem = out_dir / f"cell{ci:04d}_r{ri:03d}_contact.json"
            if args.resume and stem.exists():
                continue
            tasks.append((cfg_text, base_seed, ci, ri, beta, eps, str(out_dir)))

    jobs = args.jobs or int(os.environ.get("FIBERPACK_JOBS", "1"))
    failures = 0
    if jobs > 1 and len(tasks) > 1:
        import multiprocessing as mp
        with mp.get_context("spawn").Pool(jobs) as pool:
            for res in pool.imap_unordered(_run_cell_safe, tasks):
                if isinstance(res, str):
                    print(f"cell failed: {res}", file=_sys.stderr)
                    failures += 1
    else:
        for t in tasks:
            res = _run_cell_safe(t)
            if isinstance(res, str):
                print(f"cell failed: {res}", file=_sys.stderr)
                failures += 1

    records = [io.read_record_json(p) for p in sorted(out_dir.glob("cell*.json"))]
    io.write_records_csv(out_dir / "table.csv", records)
    print(f"sweep: {len(cells)} cells x {n_real} realizations, "
          f"{len(records)} records -> {out_dir / 'table.csv'}")
    return 0 if failures == 0 else 1


def _run_cell_safe(task):
    try:
        return _run_cell(task)
    except Exception as exc:  # isolate per-cell failures
        return f"cell{task[2]:04d}_r{task[3]:03d}: {exc}"


def cmd_toll(args) -> int:
    cfg = RunConfig.from_file(args.config)
    rows = [(b, vv, a, cfg.get("toll.radius"))
            for b in cfg.get("toll.beta")
            for vv in cfg.get("toll.volume_fraction")
            for a in cfg.get("toll.aspect")]
    table = toll_mod.toll_table(rows)
    with open(args.out, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=list(table[0].keys()))
        wr.writeheader()
        wr.writerows(table)
    print(f"toll table: {len(table)} rows -> {args.out}")
    return 0


def cmd_rve(args) -> int:
    cfg = RunConfig.from_file(args.config)
    base_seed = args.seed if args.seed is not None else cfg.get("seed")
    sizes = cfg.get("rve.sizes")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg_text = Path(args.config).read_text()

    def runner(size, k):
        c = RunConfig.from_text(cfg_text)
        c.set("window", [float(size)])
        seed = _derive_seed(base_seed, int(size), k)
        sys = generate(c.generation_config(), c.window(), RngState(seed))
        params = c.packing_params()
        sys, _ = pack_aj(sys, params)
        sys, _, _ = pack_contact(sys, params)
        st = analysis.analyze(sys, c.get("analysis.distances")[0],
                              c.get("analysis.counting_mode"))
        return {"lambda_cF": st.lambda_cF, "lambda_clF": st.lambda_clF,
                "seed": seed}

    samples, fits, table = rve_tools.rve_study(
        sizes, cfg.get("rve.n_realizations"), runner,
        phi=cfg.get("rve.phi"), variant=cfg.get("rve.variant"))

    with open(out_dir / "rve_samples.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["characteristic", "size", "volume", "n_real", "Z_bar", "D2"])
        for c, per in samples.items():
            for s in per:
                wr.writerow([c, round(s.V ** (1 / 3)), s.V, s.n_real,
                             repr(s.Z_bar), repr(s.D2)])
    with open(out_dir / "rve_table.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["size", "characteristic", "n_rve", "K", "alpha",
                     "variant", "phi"])
        for size, c, n in table:
            wr.writerow([size, c, n, repr(fits[c].K), repr(fits[c].alpha),
                         cfg.get("rve.variant"), cfg.get("rve.phi")])
    print(f"rve study over sizes {sizes} -> {out_dir}")
    return 0


def cmd_export_voxels(args) -> int:
    sys, _ = io.load_system(args.infile)
    dims = voxels.export_voxels(sys, args.spacing, args.out,
                                max_bytes=args.max_bytes)
    print(f"raster {dims[0]}x{dims[1]}x{dims[2]} at spacing {args.spacing} "
          f"-> {args.out}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fiberpack",
                                 description="ball-chain fiber packing with "
                                             "explicit inter-fiber contact")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate + prepack a fiber system")
    g.add_argument("--config", required=True)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    p = sub.add_parser("pack", help="run force-biased packing")
    p.add_argument("--config", required=True)
    p.add_argument("--mode", choices=["aj", "contact"], default="contact")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trace", help="per-iteration stats CSV")
    p.set_defaults(func=cmd_pack)

    a = sub.add_parser("analyze", help="contact statistics of a system file")
    a.add_argument("--config", required=True)
    a.add_argument("--in", dest="infile", required=True)
    a.add_argument("--out", required=True, help="record JSON path")
    a.add_argument("--counting-mode", choices=["component", "pairwise"])
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("sweep", help="parameter grid driver")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--jobs", type=int)
    s.add_argument("--resume", action="store_true")
    s.set_defaults(func=cmd_sweep)

    t = sub.add_parser("toll", help="analytical contact-intensity table")
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_toll)

    r = sub.add_parser("rve", help="variance-decay study over window sizes")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--out-dir", required=True)
    r.set_defaults(func=cmd_rve)

    v = sub.add_parser("export-voxels", help="rasterize the union of balls")
    v.add_argument("--in", dest="infile", required=True)
    v.add_argument("--spacing", type=float, required=True)
    v.add_argument("--out", required=True)
    v.add_argument("--max-bytes", type=int, default=voxels.DEFAULT_BUDGET)
    v.set_defaults(func=cmd_export_voxels)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=_sys.stderr)
        return 2
    except NonFiniteForceError as exc:
        print(f"packing aborted: {exc}", file=_sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
