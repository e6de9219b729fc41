"""Figures and summaries rebuilt from an output directory.

Every SVG is drawn from the CSV/JSON artifacts next to it, so ``repp-lab
report DIR`` can regenerate the plots of any earlier run.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from . import plotting
from .empirical import read_csv
from .extremal import h1_project, record_law_pmf

MAX_PANELS = 3


def _table(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return rows


def _col(rows, key, fn=float):
    return [fn(r[key]) for r in rows]


def _points(csv_paths, horizon, tau_max, radius, out, title_prefix="run"):
    ens = [read_csv(open(p, newline=""), horizon=horizon, n_runs=1) for p in csv_paths]
    made = []
    if not ens:
        return made
    if ens[0].marks.shape[1] >= 2:
        made.append(plotting.scatter2d(ens[0].measure(0), out / "points.svg", radius=radius,
                                       title=f"{title_prefix} 0"))
        return made
    panels = [(f"{title_prefix} {i}", e.measure(0)) for i, e in enumerate(ens[:MAX_PANELS])]
    made.append(plotting.point_panels(panels, out / "points.svg", horizon, tau_max))
    made.append(plotting.step_path(h1_project(ens[0].measure(0)), out / "extremal_path.svg",
                                   title="running minimum of the marks, run 0"))
    return made


def render(root) -> list:
    """Draw every figure the artifacts in ``root`` support; returns the SVG paths."""
    root = Path(root)
    meta = json.loads((root / "report.json").read_text()) if (root / "report.json").exists() else {}
    win = meta.get("window", {})
    H, tau, rad = win.get("horizon", 1.0), win.get("tau_max", 10.0), win.get("radius", 3.0)
    made = []

    runs = sorted((root / "runs").glob("run_*.csv")) if (root / "runs").is_dir() else []
    made += _points(runs[:MAX_PANELS], H, tau, rad, root)

    if (root / "samples.csv").exists() and (root / "reference_poisson.csv").exists():
        law = read_csv(open(root / "samples.csv", newline=""), horizon=H)
        poi = read_csv(open(root / "reference_poisson.csv", newline=""), horizon=H, n_runs=1)
        if law.marks.shape[1] >= 2:
            made.append(plotting.scatter2d(law.measure(0), root / "figure1.svg", radius=rad,
                                           title=meta.get("law_label", "")))
        else:
            made.append(plotting.point_panels(
                [("Poisson", poi.measure(0)), (meta.get("law_label", "law"), law.measure(0))],
                root / "figure1.svg", H, tau))

    if (root / "record_counts.csv").exists():
        rows = _table(root / "record_counts.csv")
        made.append(plotting.freq_vs_pmf(_col(rows, "k", int), _col(rows, "observed"), _col(rows, "reference"),
                                         root / "records.svg", xlabel="record count",
                                         title=meta.get("record_window_label", "")))
    if (root / "cluster_sizes.csv").exists():
        rows = _table(root / "cluster_sizes.csv")
        made.append(plotting.freq_vs_pmf(_col(rows, "k", int), _col(rows, "observed"), _col(rows, "reference"),
                                         root / "cluster_sizes.svg", xlabel="cluster size"))

    # acceptance tables
    for tag in ("c05", "c11"):
        p = root / f"{tag}_void_grid.csv"
        if p.exists():
            rows = _table(p)
            made.append(plotting.estimate_vs_reference(
                _col(rows, "analytic"), _col(rows, "empirical"), _col(rows, "ci_lo"), _col(rows, "ci_hi"),
                root / f"{tag}_void_grid.svg", xlabel="analytic void probability",
                ylabel="empirical void frequency"))
    if (root / "void_grid.csv").exists():
        rows = _table(root / "void_grid.csv")
        made.append(plotting.estimate_vs_reference(
            _col(rows, "analytic"), _col(rows, "empirical"), _col(rows, "ci_lo"), _col(rows, "ci_hi"),
            root / "void_grid.svg", xlabel="analytic void probability", ylabel="empirical void frequency"))
    if (root / "c04_cluster_sizes.csv").exists():
        rows = _table(root / "c04_cluster_sizes.csv")
        made.append(plotting.freq_vs_pmf(_col(rows, "k", int), _col(rows, "observed"), _col(rows, "reference"),
                                         root / "c04_cluster_sizes.svg", xlabel="cluster size"))
    if (root / "c09_survival.csv").exists():
        rows = _table(root / "c09_survival.csv")
        made.append(plotting.curves(np.array(_col(rows, "y")),
                                    {"empirical P(Z_n(1) >= y)": _col(rows, "empirical"),
                                     "exp(-y/2)": _col(rows, "reference")},
                                    root / "c09_survival.svg", xlabel="y", ylabel="probability"))
    if (root / "c10_record_counts.csv").exists():
        rows = _table(root / "c10_record_counts.csv")
        made.append(plotting.freq_vs_pmf(_col(rows, "k", int), _col(rows, "observed"), _col(rows, "reference"),
                                         root / "c10_records.svg", xlabel="records in (0.05, 1)"))
    return [str(Path(p).relative_to(root)) for p in made]


def summary(root) -> dict:
    """Pass/fail digest of a report directory."""
    root = Path(root)
    meta = json.loads((root / "report.json").read_text())
    out = {"command": meta.get("command"), "schema": meta.get("schema")}
    if "criteria" in meta:
        out["criteria"] = meta["criteria"]
    if "passed" in meta:
        out["passed"] = meta["passed"]
    elif "all_passed" in meta:
        out["passed"] = meta["all_passed"]
    return out


def pmf_table(a, b, kmax):
    return [record_law_pmf(a, b, k) for k in range(kmax + 1)]
