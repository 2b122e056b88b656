"""The five figure families rendered from engine output records.

Every figure writes a JSON sidecar (<name>.data.json) holding exactly the
plotted numbers, so tests and downstream tooling can verify the rendering
against the source CSVs value for value.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .records import group_rows, load_table

FAMILIES = {}


def family(name):
    def deco(fn):
        FAMILIES[name] = fn
        return fn
    return deco


def _write(fig, out_dir, name, fmt, sidecar):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}.{fmt}"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    (out_dir / f"{name}.data.json").write_text(
        json.dumps(sidecar, indent=1, sort_keys=True) + "\n")
    return path


def _beta_eps(row):
    params = row.get("parameters") or {}
    return params.get("generation.beta"), params.get("packing.epsilon")


def _contact_rows(rows, phase="contact"):
    sel = [r for r in rows if r["phase"] == phase]
    d_max = max(r["distance"] for r in sel) if sel else None
    return [r for r in sel if r["distance"] == d_max]


@family("intensity-vs-beta")
def plot_intensity_vs_beta(in_dir, out_dir, fmt="png"):
    """Contact intensity against the orientation parameter, one line per
    interaction distance, error bars from the spread over realizations."""
    rows = _contact_rows(load_table(Path(in_dir) / "table.csv"))
    for r in rows:
        r["_beta"], r["_eps"] = _beta_eps(r)
    sidecar = {"family": "intensity-vs-beta", "lines": []}
    fig, ax = plt.subplots(figsize=(6, 4))
    by_eps = group_rows(rows, ["_eps"])
    for (eps,), grp in sorted(by_eps.items()):
        pts = []
        for (beta,), sub in sorted(group_rows(grp, ["_beta"]).items()):
            vals = [s["lambda_c"] for s in sub]
            pts.append((beta, float(np.mean(vals)),
                        float(np.std(vals, ddof=1)) if len(vals) > 1 else None,
                        vals))
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        errs = [p[2] for p in pts]
        if any(e is not None for e in errs):
            ax.errorbar(xs, ys, yerr=[e or 0.0 for e in errs], marker="o",
                        capsize=3, label=f"eps = {eps}")
        else:
            ax.plot(xs, ys, marker="o", label=f"eps = {eps}")
        sidecar["lines"].append({"epsilon": eps, "beta": xs, "lambda_c": ys,
                                 "std": errs,
                                 "values": [p[3] for p in pts]})
    ax.set_xlabel("orientation parameter")
    ax.set_ylabel("contact intensity")
    ax.legend()
    fig.tight_layout()
    return _write(fig, out_dir, "intensity_vs_beta", fmt, sidecar)


def _poisson_pmf(k, mean):
    return math.exp(-mean + k * math.log(mean) - math.lgamma(k + 1)) \
        if mean > 0 else (1.0 if k == 0 else 0.0)


@family("contact-histogram")
def plot_contact_histogram(in_dir, out_dir, fmt="png"):
    """Per-fiber contact-count histograms for the plain and contact-packed
    models, with Poisson overlays at the two fitted means and at the
    analytical reference mean (per-fiber convention, matching the
    both-fibers-count histogram)."""
    rows = load_table(Path(in_dir) / "table.csv")
    for r in rows:
        r["_beta"], r["_eps"] = _beta_eps(r)
    iso = [r for r in rows if r["_beta"] == 1.0] or rows
    eps_max = max(r["_eps"] for r in iso)
    d_max = max(r["distance"] for r in iso)
    sidecar = {"family": "contact-histogram", "models": {}}
    fig, ax = plt.subplots(figsize=(6.5, 4))
    colors = {"aj": "tab:blue", "contact": "tab:orange"}
    kmax = 1
    toll_mean = None
    for phase in ("aj", "contact"):
        sel = [r for r in iso
               if r["phase"] == phase and r["distance"] == d_max
               and r["_eps"] == eps_max]
        counts = np.concatenate([np.asarray(r["per_fiber_contact_hist"])
                                 for r in sel]) if sel else np.zeros(0)
        if counts.size == 0:
            continue
        kmax = max(kmax, int(counts.max()))
        hist = np.bincount(counts.astype(int), minlength=kmax + 1)
        freq = hist / hist.sum()
        mean = float(counts.mean())
        ax.bar(np.arange(freq.size) + (0.0 if phase == "aj" else 0.35),
               freq, width=0.35, color=colors[phase], label=phase)
        sidecar["models"][phase] = {"freq": freq.tolist(), "mean": mean,
                                    "n_fibers": int(counts.size)}
        if toll_mean is None and sel and sel[0].get("toll_lambda_cF"):
            toll_mean = float(sel[0]["toll_lambda_cF"])
    ks = np.arange(0, kmax + 1)
    for label, mean, style in (
            ("aj fit", sidecar["models"].get("aj", {}).get("mean"), "-"),
            ("contact fit", sidecar["models"].get("contact", {}).get("mean"), "-"),
            ("analytic", toll_mean, "--")):
        if mean:
            pmf = [_poisson_pmf(int(k), mean) for k in ks]
            ax.plot(ks, pmf, style, label=f"poisson {label} ({mean:.2f})")
            sidecar.setdefault("poisson", {})[label] = {"mean": mean,
                                                        "pmf": pmf}
    ax.set_xlabel("contacts per fiber")
    ax.set_ylabel("relative frequency")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _write(fig, out_dir, "contact_histogram", fmt, sidecar)


@family("rve-fit")
def plot_rve_fit(in_dir, out_dir, fmt="png"):
    """Log-log variance-vs-volume scatter with the fitted decay line."""
    import csv as _csv
    samples = []
    with open(Path(in_dir) / "rve_samples.csv", newline="") as fh:
        for row in _csv.DictReader(fh):
            samples.append({"characteristic": row["characteristic"],
                            "V": float(row["volume"]),
                            "D2": float(row["D2"])})
    fits = {}
    with open(Path(in_dir) / "rve_table.csv", newline="") as fh:
        for row in _csv.DictReader(fh):
            fits[row["characteristic"]] = (float(row["K"]), float(row["alpha"]))
    sidecar = {"family": "rve-fit", "characteristics": {}}
    fig, axes = plt.subplots(1, max(len(fits), 1), figsize=(10, 4),
                             squeeze=False)
    for ax, (char, (K, alpha)) in zip(axes[0], sorted(fits.items())):
        pts = [(s["V"], s["D2"]) for s in samples
               if s["characteristic"] == char and s["D2"] > 0]
        vs = np.array([p[0] for p in pts])
        ds = np.array([p[1] for p in pts])
        ax.loglog(vs, ds, "o")
        vv = np.geomspace(vs.min(), vs.max(), 50)
        ax.loglog(vv, K * vv ** (-alpha), "-",
                  label=f"K={K:.3g}, alpha={alpha:.3f}")
        ax.set_title(char)
        ax.set_xlabel("volume")
        ax.set_ylabel("variance")
        ax.legend(fontsize=8)
        sidecar["characteristics"][char] = {
            "V": vs.tolist(), "D2": ds.tolist(), "K": K, "alpha": alpha}
    fig.tight_layout()
    return _write(fig, out_dir, "rve_fit", fmt, sidecar)


@family("runtime")
def plot_runtime(in_dir, out_dir, fmt="png"):
    """Packing wall time against window volume with a linear fit; the size
    axis is transformed cubically (tick labels show edge lengths)."""
    rows = [r for r in load_table(Path(in_dir) / "table.csv")
            if r["phase"] == "contact" and r.get("wall_time")]
    by_vol = group_rows(rows, ["window_1"])
    pts = []
    for (w1,), grp in sorted(by_vol.items()):
        seen = {}
        for r in grp:
            seen.setdefault((r["seed"], _beta_eps(r)), r["wall_time"])
        times = list(seen.values())
        pts.append((w1 ** 3, float(np.mean(times)),
                    float(np.std(times, ddof=1)) if len(times) > 1 else 0.0,
                    w1))
    v = np.array([p[0] for p in pts])
    t = np.array([p[1] for p in pts])
    c = float((v * t).sum() / (v * v).sum())
    ss_res = float(((t - c * v) ** 2).sum())
    ss_tot = float(((t - t.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(v, t, yerr=[p[2] for p in pts], marker="o", linestyle="none",
                capsize=3)
    vv = np.linspace(0, v.max() * 1.05, 50)
    ax.plot(vv, c * vv, "-", label=f"t = {c:.3g} V (R2 = {r2:.3f})")
    ax.set_xticks(v)
    ax.set_xticklabels([f"{p[3]:.0f}" for p in pts])
    ax.set_xlabel("window edge (axis scaled cubically with volume)")
    ax.set_ylabel("wall time [s]")
    ax.legend()
    fig.tight_layout()
    sidecar = {"family": "runtime",
               "volume": v.tolist(), "edge": [p[3] for p in pts],
               "mean_time": t.tolist(), "std_time": [p[2] for p in pts],
               "slope": c, "r2": r2}
    return _write(fig, out_dir, "runtime", fmt, sidecar)


@family("application")
def plot_application(in_dir, out_dir, fmt="png"):
    """Replication-style panels: measured contact intensity of both packing
    stages against the analytic reference, per parameter-grid cell."""
    rows = load_table(Path(in_dir) / "table.csv")
    for r in rows:
        r["_beta"], r["_eps"] = _beta_eps(r)
    d_max = max(r["distance"] for r in rows)
    rows = [r for r in rows if r["distance"] == d_max]
    eps_max = max(r["_eps"] for r in rows)
    sidecar = {"family": "application", "cells": []}
    fig, ax = plt.subplots(figsize=(6.5, 4))
    betas = sorted({r["_beta"] for r in rows})
    series = {"aj": [], "contact": [], "analytic": []}
    for beta in betas:
        cell = [r for r in rows if r["_beta"] == beta and r["_eps"] == eps_max]
        aj = [r["lambda_c"] for r in cell if r["phase"] == "aj"]
        co = [r["lambda_c"] for r in cell if r["phase"] == "contact"]
        toll = [r["toll_lambda_c_pair"] for r in cell
                if r["phase"] == "contact" and r.get("toll_lambda_c_pair")]
        series["aj"].append(float(np.mean(aj)) if aj else None)
        series["contact"].append(float(np.mean(co)) if co else None)
        series["analytic"].append(float(np.mean(toll)) if toll else None)
        sidecar["cells"].append({"beta": beta, "epsilon": eps_max,
                                 "aj": aj, "contact": co, "analytic": toll})
    for label, ys in series.items():
        style = "--" if label == "analytic" else "-"
        ax.plot(betas, ys, style, marker="o", label=label)
    ax.set_xlabel("orientation parameter")
    ax.set_ylabel("contact intensity")
    ax.legend()
    fig.tight_layout()
    sidecar["series"] = series
    sidecar["beta"] = betas
    return _write(fig, out_dir, "application", fmt, sidecar)
