"""``repp-lab`` command line.

Exit codes: 0 pass, 1 statistical failure, 2 usage or configuration error,
3 numerical or resolution error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import re
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .acceptance import (
    VOID_HEADER,
    AcceptanceSuite,
    box_families,
    dump_json,
    standard_families,
    write_freq_table,
    write_table,
)
from .config import RunConfig, load_config, parse_int
from .empirical import (
    Cell,
    band,
    choose_q,
    cluster_analysis,
    ensemble_to_csv,
    read_csv,
    void_from_counts,
)
from .ensemble import check_resolution, run_orbits
from .errors import (
    ConfigError,
    DataError,
    DomainError,
    IntervalCapError,
    QSelectionError,
    ReppError,
    ResolutionError,
    StateError,
    UnderpoweredError,
    UnsupportedOperation,
)
from .extremal import record_law_pmf
from .intervals import BoxUnion, IntervalUnion
from .limits import LimitLaw, Window, analytic_void, expected_count, sample_ensemble, sample_poisson2d
from .nu import OuterMeasureSpec, nu_eval, nu_monte_carlo
from .observables import ObservableSpec, ThresholdScheme
from .report import render, summary
from .stats import LEVEL, chi_square_pmf, compare_void, geometric_fit, ks_exponential, z_check
from .systems import parse_scalar, seed_sequence, tripling

log = logging.getLogger("repp_lab")

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
SCHEMA = "report_v1"
DEFAULT_LAW = "stacked_geometric:alpha=3/2,d=1"
RECORD_A, RECORD_B = 0.05, 1.0
_IV = re.compile(r"[\[(]\s*([^,\[\]()]+?)\s*,\s*([^,\[\]()]+?)\s*[\])]")


# ---------------------------------------------------------------------------
# shared plumbing


def _versions():
    import matplotlib
    import scipy

    return {"repp_lab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "matplotlib": matplotlib.__version__}


def _seed(text):
    try:
        s = parse_int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer seed: {text!r}") from None
    if not 0 <= s < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return s


def _load(args) -> RunConfig:
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file {path} not found")
        cfg = load_config(path.read_text())
    else:
        cfg = RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    if args.suite is not None:
        cfg.suite = args.suite
    return cfg


def _resolve_seed(cfg: RunConfig, strict: bool) -> int:
    """Master seed; acceptance mode refuses to run without one."""
    if strict or cfg.mode == "acceptance":
        cfg.require_seed()
    if cfg.seed is None:
        cfg.seed = int(np.random.SeedSequence().entropy % 2**64)
        log.warning("no seed given; drew %d from OS entropy (recorded in report.json)", cfg.seed)
    return cfg.seed


def _outdir(cfg: RunConfig, default: str) -> Path:
    out = Path(cfg.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_runs(ens, root: Path):
    """One CSV per run: ``runs/run_00000.csv``."""
    d = root / "runs"
    d.mkdir(exist_ok=True)
    order = np.argsort(ens.run_id, kind="stable")
    bounds = np.searchsorted(ens.run_id[order], np.arange(ens.n_runs + 1))
    paths = []
    for r in range(ens.n_runs):
        sel = order[bounds[r]:bounds[r + 1]]
        sub = type(ens)(ens.run_id[sel], ens.times[sel], ens.marks[sel], ens.n_runs, ens.horizon)
        p = d / f"run_{r:05d}.csv"
        with open(p, "w", newline="") as fh:
            ensemble_to_csv(sub, fh)
        paths.append(str(p.relative_to(root)))
    return paths


def _void_rows(ens, fams, reference):
    """Void grid against ``reference(fam)``; Bonferroni across families."""
    m = len(fams)
    rows, reps = [], []
    for i, f in enumerate(fams):
        est = void_from_counts(ens.counts(f))
        ref = reference(f)
        r = compare_void(est.n_void, est.n_runs, ref, level=LEVEL / m)
        reps.append(r)
        rows.append([i, ref, est.p, est.lo, est.hi, r.p_value, r.decision])
    return rows, reps


def _families(cfg, dim):
    if cfg.families:
        return list(cfg.families.values())
    return box_families() if dim >= 2 else standard_families()


def _finish(root: Path, report: dict) -> Path:
    report.setdefault("schema", SCHEMA)
    dump_json(report, root / "report.json")
    report["figures"] = render(root)
    dump_json(report, root / "report.json")
    return root / "report.json"


def _say(args, msg):
    if not args.quiet:
        print(msg)


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    cfg = _load(args)
    if cfg.system is None or cfg.observable is None:
        raise ConfigError("simulate needs [system] and [observable] blocks")
    seed = _resolve_seed(cfg, strict=False)
    root = _outdir(cfg, "repp-out")
    ladder_reports = []
    for li, n in enumerate(cfg.n_ladder):
        sub = root if len(cfg.n_ladder) == 1 else root / f"n_{n}"
        sub.mkdir(exist_ok=True)
        ladder_reports.append(_simulate_one(cfg, n, seed_sequence(seed, li), sub))
    if len(cfg.n_ladder) > 1:
        dump_json({"schema": SCHEMA, "command": "simulate", "config_hash": cfg.config_hash(), "seed": seed,
                   "ladder": [{"n": n, "dir": f"n_{n}"} for n in cfg.n_ladder], "versions": _versions()},
                  root / "report.json")
    _say(args, f"wrote {root}")
    return EXIT_PASS


def _simulate_one(cfg: RunConfig, n: int, ss, root: Path) -> dict:
    obs = cfg.observable
    t0 = time.perf_counter()
    batch = run_orbits(cfg.system, obs, n, cfg.M, ss, tau_max=cfg.tau_max, horizon=cfg.horizon,
                       lookahead=cfg.lookahead, records=cfg.records,
                       radius=cfg.radius if obs.dimension > 1 else None)
    log.info("simulated %d runs at n=%d in %.2f s", cfg.M, n, time.perf_counter() - t0)
    check_resolution(batch)
    ts = ThresholdScheme(obs, n)
    ens = batch.ensemble() if obs.dimension == 1 else batch.multi_ensemble(ts, cfg.radius)
    csvs = _write_runs(ens, root)
    try:
        q = choose_q(cfg.system, obs, ts, (0, cfg.tau_max))
    except (QSelectionError, UnsupportedOperation, IntervalCapError) as exc:
        log.warning("memory depth not determined (%s); clusters use q=1", exc)
        q = 1
    q = min(q, batch.lookahead)
    cs = batch.clusters(q)
    write_freq_table(root / "cluster_sizes.csv", cs.sizes, lambda k: 0.0, 1) if len(cs.sizes) else None
    report = {
        "command": "simulate",
        "config_hash": cfg.config_hash(),
        "versions": _versions(),
        "seed": cfg.seed,
        "n": n,
        "M": cfg.M,
        "system": cfg.system.to_text(),
        "observable": obs.to_text(),
        "window": {"horizon": cfg.horizon, "tau_max": cfg.tau_max, "radius": cfg.radius},
        "lookahead": cfg.lookahead,
        "q": q,
        "clusters": cs.to_dict(),
        "csv": csvs,
        "atoms": int(len(ens.times)),
        "unresolved_steps": int(batch.unresolved),
    }
    if cfg.families:
        rows = []
        for name, fam in cfg.families.items():
            v = void_from_counts(ens.counts(fam))
            rows.append({"family": name, **v.to_dict()})
        report["void_frequencies"] = rows
    if cfg.records:
        rec = batch.record_ensemble()
        with open(root / "records.csv", "w", newline="") as fh:
            ensemble_to_csv(rec, fh)
        counts = batch.record_counts(RECORD_A, RECORD_B)
        write_freq_table(root / "record_counts.csv", counts, lambda k: record_law_pmf(RECORD_A, RECORD_B, k), 0)
        report["records"] = {"window": [RECORD_A, RECORD_B], "mean_count": float(counts.mean()),
                             "log_poisson_mean": math.log(RECORD_B / RECORD_A)}
        report["record_window_label"] = f"records in ({RECORD_A}, {RECORD_B})"
    _finish(root, report)
    return report


# ---------------------------------------------------------------------------
# limit-sample


def _law(args, cfg):
    if getattr(args, "law", None):
        return LimitLaw.parse(args.law)
    if cfg.law is not None:
        return cfg.law
    return LimitLaw.parse(DEFAULT_LAW)


def _law_label(law: LimitLaw) -> str:
    d = law.to_dict()
    keys = [f"{k}={v}" for k, v in sorted(d.items()) if k != "variant" and v is not None]
    return law.variant + (f" ({', '.join(keys)})" if keys else "")


def cmd_limit_sample(args) -> int:
    cfg = _load(args)
    seed = _resolve_seed(cfg, strict=False)
    law = _law(args, cfg)
    win = Window(args.horizon if args.horizon is not None else cfg.horizon,
                 args.tau_max if args.tau_max is not None else cfg.tau_max,
                 args.radius if args.radius is not None else cfg.radius)
    M = args.M if args.M is not None else cfg.M
    root = _outdir(cfg, "repp-limit")
    ens = sample_ensemble(law, win, M, seed_sequence(seed, 1))
    poi = sample_poisson2d(win, seed_sequence(seed, 2))
    with open(root / "samples.csv", "w", newline="") as fh:
        ensemble_to_csv(ens, fh)
    with open(root / "reference_poisson.csv", "w", newline="") as fh:
        ensemble_to_csv(type(ens)(np.zeros(len(poi), dtype=np.int64), poi.times, poi.marks, 1, poi.horizon), fh)
    per_run = np.bincount(ens.run_id, minlength=M)
    report = {
        "command": "limit-sample",
        "config_hash": cfg.config_hash() if cfg.text else None,
        "versions": _versions(),
        "seed": seed,
        "law": law.to_dict(),
        "law_label": _law_label(law),
        "window": {"horizon": win.horizon, "tau_max": win.tau_max, "radius": win.radius},
        "M": M,
        "atoms": int(per_run.sum()),
        "mean_atoms_per_run": float(per_run.mean()) if M else 0.0,
        "csv": ["samples.csv", "reference_poisson.csv"],
    }
    if law.mark_dim == 1 and law.variant != "compound1d" and win.tau_max > 0 and win.horizon > 0:
        report["expected_atoms_per_run"] = expected_count(law, Cell(0.0, win.horizon, band((0, win.tau_max))))
    _finish(root, report)
    _say(args, f"wrote {root}")
    return EXIT_PASS


# ---------------------------------------------------------------------------
# compare


def cmd_compare(args) -> int:
    cfg = _load(args)
    if (cfg.suite or "") == "acceptance":
        return _compare_acceptance(args, cfg)
    if cfg.suite:
        raise ConfigError(f"unknown suite {cfg.suite!r}; the only named suite is 'acceptance'")
    return _compare_artifact(args, cfg)


def _compare_acceptance(args, cfg) -> int:
    seed = _resolve_seed(cfg, strict=True)
    only = None
    if args.only:
        try:
            only = [int(x) for x in args.only.split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"--only takes comma-separated criterion numbers, got {args.only!r}") from None
        bad = [i for i in only if not 1 <= i <= 15]
        if bad:
            raise ConfigError(f"no acceptance criterion {bad[0]}; criteria are numbered 1-15")
    root = _outdir(cfg, "acceptance-out")
    outcomes = AcceptanceSuite(seed, root).run(only)
    meta = json.loads((root / "report.json").read_text())
    meta["command"] = "compare"
    meta["figures"] = render(root)
    dump_json(meta, root / "report.json")
    for oc in outcomes:
        _say(args, f"[{'PASS' if oc.passed else 'FAIL'}] {oc.cid:2d} {oc.title}")
    return EXIT_PASS if all(o.passed for o in outcomes) else EXIT_FAIL


def _read_artifact(src: Path):
    rep_path = src / "report.json"
    if not rep_path.exists():
        raise DataError(f"{src} holds no report.json; point --input at a simulate output directory")
    meta = json.loads(rep_path.read_text())
    if meta.get("command") != "simulate" or "csv" not in meta:
        raise DataError(f"{src} is not a single-n simulate artifact")
    H = meta["window"]["horizon"]
    parts = []
    for r, rel in enumerate(meta["csv"]):
        with open(src / rel, newline="") as fh:
            e = read_csv(fh, horizon=H, n_runs=1)
        parts.append((np.full(len(e.times), r, dtype=np.int64), e.times, e.marks))
    if not parts:
        raise DataError("artifact holds no runs")
    from .empirical import PointEnsemble

    rid = np.concatenate([p[0] for p in parts])
    t = np.concatenate([p[1] for p in parts])
    mk = np.concatenate([p[2] for p in parts]) if len(t) else np.empty((0, 1))
    return meta, PointEnsemble(rid, t, mk, len(parts), H)


def _compare_artifact(args, cfg) -> int:
    if not args.input:
        raise ConfigError("compare needs --input DIR (a simulate artifact) or --suite acceptance")
    meta, ens = _read_artifact(Path(args.input))
    if ens.n_runs == 0:
        raise DataError("empty input")
    law = _law(args, cfg)
    root = _outdir(cfg, str(Path(args.input) / "compare"))
    dim = ens.marks.shape[1]
    if (law.mark_dim if law.variant != "compound1d" else 1) != dim:
        raise DataError(f"artifact marks have dimension {dim}, law {law.variant} has {law.mark_dim}")
    fams = _families(cfg, dim)
    rows, voids = _void_rows(ens, fams, lambda f: analytic_void(law, f))
    write_table(root / "void_grid.csv", VOID_HEADER, rows)

    # intensity grid
    cells = [c for f in fams for c in f.cells]
    means = []
    for ci, c in enumerate(cells):
        from .empirical import RectangleFamily

        col = ens.counts(RectangleFamily((c,)))[:, 0].astype(float)
        se = float(col.std(ddof=1) / math.sqrt(len(col))) if len(col) > 1 else 0.0
        means.append(z_check(float(col.mean()), expected_count(law, c), se, len(col), f"mean_count_{ci}",
                             level=LEVEL / len(cells)))
    tests = {"void_grid": [r.to_dict() for r in voids], "intensity_grid": [r.to_dict() for r in means]}
    ok = all(r.passed for r in voids) and all(r.passed for r in means)

    # cluster law and gap law from the time grid
    n, q = int(meta["n"]), int(meta.get("q", 1))
    theta = float(law.theta) if law.theta is not None else 1.0
    if dim == 1 and n > 0:
        idx = np.rint(ens.times * n).astype(np.int64)
        cs = cluster_analysis(ens.run_id, idx, ens.marks[:, 0], q, int(round(meta["window"]["horizon"] * n)),
                              ens.n_runs)
        extra = {}
        if len(cs.sizes):
            try:
                g = geometric_fit(cs.sizes, theta)
                extra["cluster_sizes"] = g.to_dict()
                ok &= g.passed
                write_freq_table(root / "cluster_sizes.csv", cs.sizes, lambda k: theta * (1 - theta) ** (k - 1), 1)
            except UnderpoweredError as exc:
                extra["cluster_sizes"] = {"skipped": str(exc)}
        H, tau = meta["window"]["horizon"], meta["window"]["tau_max"]
        starts = np.sort(cs.run_of_start * H + cs.starts / n)
        gaps = np.diff(starts)
        try:
            k = ks_exponential(gaps[gaps > 0], theta * tau)
            extra["cluster_gaps"] = k.to_dict()
            ok &= k.passed
        except UnderpoweredError as exc:
            extra["cluster_gaps"] = {"skipped": str(exc)}
        tests.update(extra)
    src = Path(args.input)
    if (src / "records.csv").exists():
        with open(src / "records.csv", newline="") as fh:
            rec = read_csv(fh, horizon=meta["window"]["horizon"], n_runs=ens.n_runs)
        sel = (rec.times > RECORD_A) & (rec.times < RECORD_B)
        counts = np.bincount(rec.run_id[sel], minlength=ens.n_runs)
        r = chi_square_pmf(counts, lambda k: record_law_pmf(RECORD_A, RECORD_B, k),
                           f"logPoisson({RECORD_A},{RECORD_B})", 0, test="chi2_records")
        tests["records"] = r.to_dict()
        ok &= r.passed
    report = {"command": "compare", "law": law.to_dict(), "input": str(src), "runs": ens.n_runs,
              "input_config_hash": meta.get("config_hash"), "versions": _versions(), "tests": tests,
              "passed": bool(ok), "families": len(fams)}
    _finish(root, report)
    _say(args, f"{'PASS' if ok else 'FAIL'}: {src} against {_law_label(law)}")
    return EXIT_PASS if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# records


def cmd_records(args) -> int:
    cfg = _load(args)
    seed = _resolve_seed(cfg, strict=False)
    a, b = args.a, args.b
    if not 0 < a < b:
        raise ConfigError("record window needs 0 < a < b")
    if args.two_site:
        system, obs = tripling(), ObservableSpec.two_site()
        n = cfg.n if args.config else 10**6
        M = args.M or (cfg.M if args.config else 3000)
    else:
        if cfg.system is None or cfg.observable is None:
            raise ConfigError("records needs [system] and [observable] blocks (or --two-site)")
        system, obs, n, M = cfg.system, cfg.observable, cfg.n, args.M or cfg.M
    if b > cfg.horizon:
        raise ConfigError(f"record window end {b} exceeds the horizon {cfg.horizon}")
    root = _outdir(cfg, "repp-records")
    batch = run_orbits(system, obs, n, M, seed_sequence(seed, 53 if args.two_site else 0), tau_max=cfg.tau_max,
                       horizon=cfg.horizon, lookahead=1, records=True)
    check_resolution(batch)
    rec = batch.record_ensemble()
    with open(root / "records.csv", "w", newline="") as fh:
        ensemble_to_csv(rec, fh)
    counts = batch.record_counts(a, b)
    write_freq_table(root / "record_counts.csv", counts, lambda k: record_law_pmf(a, b, k), 0)
    ref = math.log(b / a)
    mean = float(counts.mean())
    se = float(counts.std(ddof=1) / math.sqrt(M)) if M > 1 else math.nan
    void = compare_void(int(np.sum(counts == 0)), M, a / b)
    report = {
        "command": "records",
        "config_hash": cfg.config_hash() if cfg.text else None,
        "versions": _versions(),
        "seed": seed,
        "n": n,
        "M": M,
        "system": system.to_text(),
        "observable": obs.to_text(),
        "window": {"horizon": cfg.horizon, "tau_max": cfg.tau_max, "radius": cfg.radius},
        "record_window": [a, b],
        "record_window_label": f"records in ({a}, {b})",
        "mean": mean,
        "se": se,
        "log_poisson_mean": ref,
        "void": void.to_dict(),
    }
    if args.two_site:
        z = (mean - ref) / se
        report["two_site"] = {
            "excess_z": z,
            "ratio": mean / ref,
            "derived_ratio": 11 / 10,
            "stated_ratio": 12 / 11,
            "non_convergence_flagged": bool(z > 3),
        }
        ok = z > 3
        msg = f"records mean {mean:.4f} vs log-Poisson {ref:.4f} (ratio {mean / ref:.4f}, excess z={z:.1f})"
    else:
        chi = chi_square_pmf(counts, lambda k: record_law_pmf(a, b, k), f"logPoisson({a},{b})", 0,
                             test="chi2_records")
        report["chi_square"] = chi.to_dict()
        ok = chi.passed and void.passed
        msg = f"records mean {mean:.4f} vs {ref:.4f}; chi2 p={chi.p_value:.3g}, void p={void.p_value:.3g}"
    report["passed"] = bool(ok)
    _finish(root, report)
    _say(args, ("PASS: " if ok else "FAIL: ") + msg)
    return EXIT_PASS if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# nu


def parse_set(text: str) -> IntervalUnion:
    """``"(0, 1] (2, 3]"``; bracket style is ignored (measures only)."""
    pairs = [(parse_scalar(lo), parse_scalar(hi)) for lo, hi in _IV.findall(text)]
    if not pairs or _IV.sub("", text).replace("u", "").replace("∪", "").strip():
        raise ConfigError(f"cannot read interval union {text!r}; write (lo, hi] (lo, hi] ...")
    return IntervalUnion([(Fraction(a) if not isinstance(a, float) else a,
                           Fraction(b) if not isinstance(b, float) else b) for a, b in pairs], closed="right")


def parse_box(text: str):
    vals = [parse_scalar(v) for v in text.split(",")]
    if len(vals) % 2:
        raise ConfigError(f"box needs lo..., hi... coordinates, got {text!r}")
    d = len(vals) // 2
    return (tuple(vals[:d]), tuple(vals[d:]))


def cmd_nu(args) -> int:
    cfg = _load(args)
    if not args.spec:
        raise ConfigError("nu needs --spec VARIANT:key=value,...")
    spec = OuterMeasureSpec.parse(args.spec)
    if args.box:
        boxes = [parse_box(b) for b in args.box]
        a = BoxUnion(boxes)
    elif args.set:
        a = parse_set(args.set)
    else:
        raise ConfigError("nu needs --set '(lo, hi] ...' or --box lo1,lo2,hi1,hi2")
    seed = _resolve_seed(cfg, strict=False)
    value = nu_eval(spec, a)
    mc = nu_monte_carlo(spec, a, args.samples, seed_sequence(seed, 0))
    chk = z_check(mc.estimate, float(value), mc.sigma, args.samples, "nu_monte_carlo")
    report = {
        "command": "nu",
        "schema": SCHEMA,
        "spec": spec.to_dict(),
        "set": a.to_list(),
        "value": float(value),
        "exact": str(value) if isinstance(value, Fraction) else None,
        "monte_carlo": {"estimate": mc.estimate, "sigma": mc.sigma, "samples": args.samples, "seed": seed},
        "check": chk.to_dict(),
        "passed": chk.passed,
    }
    if cfg.out:
        root = _outdir(cfg, ".")
        dump_json(report, root / "report.json")
    if not args.quiet:
        from .acceptance import _jsonable

        print(json.dumps(_jsonable(report), indent=2, sort_keys=True))
    return EXIT_PASS if chk.passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# report


def cmd_report(args) -> int:
    cfg = _load(args)
    target = args.dir or cfg.out
    if not target:
        raise ConfigError("report needs a directory (positional or --out)")
    root = Path(target)
    if not (root / "report.json").exists():
        raise DataError(f"{root} holds no report.json")
    figs = render(root)
    meta = json.loads((root / "report.json").read_text())
    meta["figures"] = figs
    dump_json(meta, root / "report.json")
    s = summary(root)
    for c in s.get("criteria", []):
        _say(args, f"[{'PASS' if c['passed'] else 'FAIL'}] {c['id']:2d} {c['title']}")
    for f in figs:
        _say(args, f"figure {root / f}")
    passed = s.get("passed", True)
    return EXIT_PASS if passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser and entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI-style run configuration")
    common.add_argument("--seed", type=_seed, help="master seed (unsigned 64-bit)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--suite", help="named test suite (compare)")
    common.add_argument("-q", "--quiet", action="store_true")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="repp-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"repp-lab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="orbit ensembles and empirical REPPs")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("limit-sample", parents=[common], help="sample a limiting point process")
    s.add_argument("--law", help=f"law spec, e.g. {DEFAULT_LAW!r}")
    s.add_argument("-M", type=parse_int, help="number of samples")
    s.add_argument("--horizon", type=float)
    s.add_argument("--tau-max", type=float)
    s.add_argument("--radius", type=float)
    s.set_defaults(func=cmd_limit_sample)

    s = sub.add_parser("compare", parents=[common], help="test an artifact against a law, or run a suite")
    s.add_argument("--input", help="simulate output directory")
    s.add_argument("--law", help="law spec for the comparison")
    s.add_argument("--only", help="comma-separated acceptance criteria, e.g. 1,5,12")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("records", parents=[common], help="record counts against the log-Poisson law")
    s.add_argument("--a", type=float, default=RECORD_A)
    s.add_argument("--b", type=float, default=RECORD_B)
    s.add_argument("-M", type=parse_int)
    s.add_argument("--two-site", action="store_true", help="two-site observable on the tripling map")
    s.set_defaults(func=cmd_records)

    s = sub.add_parser("nu", parents=[common], help="evaluate the outer measure with a Monte-Carlo check")
    s.add_argument("--spec", help="e.g. contraction:lam=1/2")
    s.add_argument("--set", help="interval union, e.g. '(0, 1] (2, 3]'")
    s.add_argument("--box", action="append", help="box lo1,lo2,hi1,hi2 (repeatable)")
    s.add_argument("--samples", type=parse_int, default=10**5)
    s.set_defaults(func=cmd_nu)

    s = sub.add_parser("report", parents=[common], help="re-render figures and summarise an output directory")
    s.add_argument("dir", nargs="?")
    s.set_defaults(func=cmd_report)
    return p


USAGE_ERRORS = (ConfigError, DomainError, DataError, UnsupportedOperation, QSelectionError, UnderpoweredError,
                FileNotFoundError)
NUMERIC_ERRORS = (ResolutionError, IntervalCapError, StateError, FloatingPointError, OverflowError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    level = logging.WARNING - 10 * args.verbose
    if args.quiet:
        level = logging.ERROR
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", force=True)
    try:
        return args.func(args)
    except USAGE_ERRORS as exc:
        print(f"repp-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"repp-lab: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ReppError as exc:
        print(f"repp-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
