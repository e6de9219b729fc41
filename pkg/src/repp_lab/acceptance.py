"""The acceptance battery: fifteen numbered checks with JSON/CSV/SVG output.

Each check returns an ``Outcome``. The doubling-map ensemble (M = 10^4,
n = 10^6) is simulated once and shared: checks that ask for fewer runs use
its prefix, which is bit-identical to a smaller ensemble with the same seed.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .empirical import (
    Cell,
    RectangleFamily,
    band,
    choose_q,
    dprime_diagnostic,
    mark_set,
    void_from_counts,
)
from .ensemble import run_orbits
from .extremal import h_record_projection, record_law_pmf
from .empirical import PointMeasure
from .intervals import BoxUnion, IntervalUnion
from .limits import LimitLaw, Window, analytic_void, expected_count, sample_ensemble
from .nu import OuterMeasureSpec, empirical_nu, nu_eval, nu_monte_carlo
from .observables import ObservableSpec, ThresholdScheme
from .stats import (
    LEVEL,
    bonferroni_z,
    chi_square_pmf,
    compare_void,
    geometric_fit,
    z_check,
)
from .systems import doubling, period_of, seed_sequence, torus23, tripling

log = logging.getLogger("repp_lab.acceptance")

N_ACC = 10**6
TAU_MAX = 10.0
M_SHARED = 10_000
RECORD_WINDOW = (0.05, 1.0)
CRITERIA = tuple(range(1, 16))
NU_REL_FLOOR = 1e-8


def _iu(*pairs):
    return band(*pairs)


def standard_families():
    """Twenty rectangle families on ``[0, 1) x (0, 10]`` (bands are right-closed)."""
    spec = [
        [(0, 1, [(0, 1)])],
        [(0, 1, [(0, 2)])],
        [(0, 1, [(1, 3)])],
        [(0, 0.5, [(0, 4)])],
        [(0.5, 1, [(2, 6)])],
        [(0, 1, [(5, 10)])],
        [(0.2, 0.6, [(0, 10)])],
        [(0, 0.25, [(0, 1)]), (0.25, 1, [(1, 2)])],
        [(0, 0.5, [(0, 1), (4, 8)])],
        [(0, 0.3, [(0, 2)]), (0.3, 0.6, [(2, 4)]), (0.6, 1, [(4, 8)])],
        [(0, 1, [(0.5, 1), (2, 2.5)])],
        [(0.1, 0.9, [(3, 3.5), (6, 10)])],
        [(0, 0.5, [(1, 2)]), (0.5, 1, [(0, 1)])],
        [(0, 1, [(0, 0.25)])],
        [(0, 0.1, [(0, 10)])],
        [(0.4, 1, [(1.5, 6)])],
        [(0, 0.5, [(0, 3)]), (0.7, 1, [(0, 3)])],
        [(0, 1, [(2.5, 10)])],
        [(0, 0.6, [(0, 0.5), (1, 1.5), (2, 2.5)])],
        [(0.25, 0.75, [(0, 5)])],
    ]
    return [RectangleFamily(tuple(Cell(a, b, _iu(*bands)) for a, b, bands in fam)) for fam in spec]


def box_families():
    def box(x0, y0, x1, y1):
        return ((Fraction(x0), Fraction(y0)), (Fraction(x1), Fraction(y1)))

    return [
        RectangleFamily((Cell(0, 1, BoxUnion([box(-1, -1, 1, 1)], 2)),)),
        RectangleFamily((Cell(0, 0.5, BoxUnion([box(0, -1, 2, Fraction(1, 2))], 2)),)),
        RectangleFamily((Cell(0, 1, BoxUnion([box(-2, -2, Fraction(-1, 2), 2)], 2)),)),
        RectangleFamily((Cell(0, 0.4, BoxUnion([box(-1, -1, 1, 1)], 2)),
                         Cell(0.4, 1, BoxUnion([box(1, 0, 2, 2), box(-2, -2, -1, 0)], 2)))),
        RectangleFamily((Cell(0.2, 0.9, BoxUnion([box(Fraction(-1, 2), -2, Fraction(1, 2), 2)], 2)),)),
    ]


def time_families():
    return [
        RectangleFamily((Cell(0, 0.3),)),
        RectangleFamily((Cell(0.3, 1),)),
        RectangleFamily((Cell(0, 0.2), Cell(0.5, 0.9))),
        RectangleFamily((Cell(0, 1),)),
    ]


def sampler_laws():
    return [
        LimitLaw.poisson2d(),
        LimitLaw.compound1d(Fraction(1, 2), 2),
        LimitLaw.stacked_geometric(Fraction(3, 2), 1),
        LimitLaw.stacked_geometric(2, 1),
        LimitLaw.stacked_geometric(2, 2),
        LimitLaw.poisson_multid(2),
        LimitLaw.stacked_linear([[2, 0], [0, 3]]),
        LimitLaw.stacked_linear([[2, 1], [0, 2]]),
        LimitLaw.ndag([[2, 0], [0, 3]]),
        LimitLaw.hat_n(Fraction(5, 2)),
        LimitLaw.double_hat_n(),
    ]


def nu_specs():
    return [
        ("lebesgue", OuterMeasureSpec.lebesgue()),
        ("contraction_1/2", OuterMeasureSpec.contraction(Fraction(1, 2))),
        ("contraction_2/3", OuterMeasureSpec.contraction(Fraction(2, 3))),
        ("mixture_two_site", OuterMeasureSpec.mixture(Fraction(10, 11), Fraction(1, 11), Fraction(10, 3))),
        ("mixture_hat", OuterMeasureSpec.mixture(Fraction(1, 2), Fraction(1, 2), Fraction(2, 5))),
        ("angular_diag23", OuterMeasureSpec.angular(((2, 0), (0, 3)))),
    ]


# ---------------------------------------------------------------------------
# outcome plumbing


@dataclass
class Outcome:
    cid: int
    title: str
    passed: bool
    metrics: dict
    reports: list = field(default_factory=list)

    def to_dict(self):
        return {
            "id": self.cid,
            "title": self.title,
            "passed": bool(self.passed),
            "metrics": _jsonable(self.metrics),
            "reports": [r.to_dict() for r in self.reports],
        }


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, Fraction):
        return str(x)
    return x


def dump_json(obj, path):
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in r])


VOID_HEADER = ["family", "analytic", "empirical", "ci_lo", "ci_hi", "p_value", "decision"]


def write_freq_table(path, sample, pmf, kmin):
    x = np.asarray(sample, dtype=np.int64)
    ks = range(kmin, max(int(x.max()) if x.size else kmin, kmin) + 1)
    write_table(path, ["k", "observed", "reference"], [[k, float(np.mean(x == k)), float(pmf(k))] for k in ks])


def sha256_tree(root) -> dict:
    root = Path(root)
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


# ---------------------------------------------------------------------------
# the suite


class AcceptanceSuite:
    def __init__(self, seed: int, out_dir=None):
        self.seed = int(seed)
        self.out = Path(out_dir) if out_dir is not None else None
        self._cache = {}
        if self.out is not None:
            self.out.mkdir(parents=True, exist_ok=True)

    def ss(self, *keys):
        return seed_sequence(self.seed, *keys)

    def path(self, name):
        return None if self.out is None else self.out / name

    # shared ensembles --------------------------------------------------------
    def doubling_batch(self):
        if "doubling" not in self._cache:
            t0 = time.perf_counter()
            b = run_orbits(doubling(), ObservableSpec("g1", (0,)), N_ACC, M_SHARED, self.ss(1),
                           tau_max=TAU_MAX, lookahead=8)
            dt = time.perf_counter() - t0
            log.info("doubling ensemble: %d runs of n=%d in %.1f s (%.1f s per 2000 runs)",
                     M_SHARED, N_ACC, dt, dt * 2000 / M_SHARED)
            self._cache["doubling"] = b
        return self._cache["doubling"]

    def run(self, only=None):
        ids = CRITERIA if only is None else tuple(sorted(set(only)))
        outcomes = []
        for cid in ids:
            t0 = time.perf_counter()
            oc = getattr(self, f"c{cid:02d}")()
            log.info("criterion %d %s in %.1f s", cid, "PASS" if oc.passed else "FAIL", time.perf_counter() - t0)
            outcomes.append(oc)
            if self.out is not None:
                (self.out / "criteria").mkdir(exist_ok=True)
                dump_json(oc.to_dict(), self.out / "criteria" / f"c{cid:02d}.json")
        if self.out is not None:
            dump_json({
                "schema": "report_v1",
                "suite": "acceptance",
                "seed": self.seed,
                "version": __version__,
                "criteria": [{"id": o.cid, "title": o.title, "passed": bool(o.passed)} for o in outcomes],
                "all_passed": all(o.passed for o in outcomes),
            }, self.out / "report.json")
        return outcomes

    # 1-3: extremal index ----------------------------------------------------
    def _theta(self, cid, title, spec, obs, batch, lo, hi, ref, q):
        cs = batch.clusters(q)
        ok = lo <= cs.theta_aq <= hi and lo <= cs.theta_cc <= hi
        m = {"theta_aq": cs.theta_aq, "theta_aq_se": cs.theta_aq_se, "theta_cc": cs.theta_cc,
             "theta_cc_se": cs.theta_cc_se, "interval": [lo, hi], "reference": ref, "q": q,
             "runs": batch.n_runs, "n": batch.n, "exceedances": cs.n_exceedances,
             "clusters": int(len(cs.sizes))}
        return Outcome(cid, title, ok, m)

    def c01(self):
        spec, obs = doubling(), ObservableSpec("g1", (0,))
        q = choose_q(spec, obs, ThresholdScheme(obs, N_ACC))
        return self._theta(1, "extremal index, doubling map, zeta=0", spec, obs,
                           self.doubling_batch().subset(2000), 0.48, 0.52, 0.5, q)

    def c02(self):
        spec, obs = tripling(), ObservableSpec("g1", (0,))
        q = choose_q(spec, obs, ThresholdScheme(obs, N_ACC))
        b = run_orbits(spec, obs, N_ACC, 2000, self.ss(2), tau_max=TAU_MAX, lookahead=8)
        return self._theta(2, "extremal index, tripling map, zeta=0", spec, obs, b, 0.647, 0.687, 2 / 3, q)

    def c03(self):
        spec, obs = torus23(), ObservableSpec("g1", (0, 0))
        q = period_of(spec, obs.zeta)  # fixed point: clusters are consecutive visits
        b = run_orbits(spec, obs, N_ACC, 2000, self.ss(3), tau_max=TAU_MAX, lookahead=8)
        return self._theta(3, "extremal index, torus map diag(2,3), zeta=(0,0)", spec, obs, b, 0.81, 0.86,
                           5 / 6, q)

    # 4: cluster sizes ----------------------------------------------------------
    def c04(self):
        cs = self.doubling_batch().clusters(1)
        rep = geometric_fit(cs.sizes, 0.5)
        if self.out is not None:
            write_freq_table(self.path("c04_cluster_sizes.csv"), cs.sizes, lambda k: 0.5**k, 1)
        ok = rep.passed and len(cs.sizes) >= 10_000
        return Outcome(4, "geometric cluster sizes, doubling map", ok,
                       {"clusters": int(len(cs.sizes)), "mean_size": float(np.mean(cs.sizes))}, [rep])

    # 5 and 11: void grids -----------------------------------------------------
    def _void_grid(self, ens, nu_spec, tag):
        fams = standard_families()
        counts = [ens.counts(f) for f in fams]
        m = len(fams)
        reports, rows = [], []
        for i, (f, c) in enumerate(zip(fams, counts)):
            est = void_from_counts(c)
            ref = analytic_void(nu_spec, f)
            r = compare_void(est.n_void, est.n_runs, ref, level=LEVEL / m)
            reports.append(r)
            rows.append([i, ref, est.p, est.lo, est.hi, r.p_value, r.decision])
        if self.out is not None:
            write_table(self.path(f"{tag}_void_grid.csv"), VOID_HEADER, rows)
        passed = sum(r.passed for r in reports)
        return reports, passed, m

    def c05(self):
        b = self.doubling_batch().subset(5000)
        reps, k, m = self._void_grid(b.ensemble(), OuterMeasureSpec.contraction(Fraction(1, 2)), "c05")
        return Outcome(5, "void-probability grid, doubling map", k >= math.ceil(0.95 * m),
                       {"cells_passed": k, "cells": m, "runs": b.n_runs, "bonferroni_level": LEVEL / m}, reps)

    # 6: stack ratio -------------------------------------------------------------
    def c06(self):
        b = self.doubling_batch()
        order = np.lexsort((b.idx, b.run_id))
        r, j, mk, off = b.run_id[order], b.idx[order], b.marks[order], b.offsets[order, 0]
        pair = (r[1:] == r[:-1]) & (j[1:] - j[:-1] == 1)
        near = np.abs(off[:-1]) < 2.0**-20
        sel = pair & near
        ratio = mk[1:][sel] / mk[:-1][sel]
        same_side = np.sign(off[1:][sel]) == np.sign(off[:-1][sel])
        err = float(np.max(np.abs(ratio / 2 - 1))) if ratio.size else math.inf
        ok = ratio.size > 0 and err < 1e-3 and bool(np.all(same_side))
        return Outcome(6, "stack ratio within clusters, doubling map", ok,
                       {"pairs": int(ratio.size), "max_relative_error": err, "reference_ratio": 2,
                        "same_side": bool(np.all(same_side))})

    # 7: samplers ---------------------------------------------------------------
    def c07(self):
        M = 100_000
        window = Window(1.0, TAU_MAX, 3.0)
        scalar = [standard_families()[i] for i in (0, 2, 3, 7, 9, 11)]
        checks = []
        for li, law in enumerate(sampler_laws()):
            ens = sample_ensemble(law, window, M, self.ss(7, li))
            if law.variant == "compound1d":
                fams = time_families()
            elif law.mark_dim == 2:
                fams = box_families()
            else:
                fams = scalar
            cnt_fams = [ens.counts(f) for f in fams]
            for fi, (f, c) in enumerate(zip(fams, cnt_fams)):
                est = void_from_counts(c)
                checks.append(("void", li, law.variant, fi, None,
                               compare_void(est.n_void, est.n_runs, analytic_void(law, f))))
                for ci, cell in enumerate(f.cells):
                    col = c[:, ci].astype(float)
                    exp_ = expected_count(law, cell)
                    checks.append(("mean", li, law.variant, fi, ci,
                                   z_check(float(col.mean()), exp_, float(col.std(ddof=1) / math.sqrt(M)), M,
                                           "mean_count")))
        m = len(checks)
        zc = bonferroni_z(LEVEL, m)
        level = LEVEL / m
        rows, beyond3 = [], 0
        for kind, li, v, fi, ci, rep in checks:
            z = rep.details.get("z", rep.statistic)
            beyond3 += abs(z) > 3
            rows.append([kind, li, v, fi, "" if ci is None else ci, float(z), rep.p_value])
        if self.out is not None:
            write_table(self.path("c07_sampler_checks.csv"), ["check", "law", "variant", "family", "cell", "z",
                                                               "p_value"], rows)
        ok = all(rep.p_value > level for *_, rep in checks)
        return Outcome(7, "limit-law samplers against analytic voids and intensities", ok,
                       {"checks": m, "samples_per_law": M, "bonferroni_z": zc,
                        "max_abs_z": max(abs(r[5]) for r in rows), "beyond_3sigma": int(beyond3),
                        "expected_beyond_3sigma_under_null": m * 0.0027})

    # 8: outer measure ---------------------------------------------------------
    def c08(self):
        rng = np.random.default_rng(self.ss(8))
        checks = []
        for si, (name, spec) in enumerate(nu_specs()):
            for k in range(100):
                a = _random_union(rng)
                exact = float(nu_eval(spec, a))
                mc = nu_monte_carlo(spec, a, 10_000, self.ss(8, si, k))
                checks.append((name, k, exact, mc.estimate, mc.sigma))
        m = len(checks)
        zc = bonferroni_z(LEVEL, m)
        # sigma floor: the angular formula is a quadrature accurate to ~1e-9
        zs = [(e - x) / math.hypot(s, NU_REL_FLOOR * max(1.0, abs(x))) for _, _, x, e, s in checks]
        ok_mc = all(abs(z) < zc for z in zs)
        # exact geometry at n = 2^20 against the contraction formula
        n = 2**20
        obs = ObservableSpec("g1", (0,))
        ts = ThresholdScheme(obs, n)
        lam = OuterMeasureSpec.contraction(Fraction(1, 2))
        rel = []
        for f in standard_families():
            for c in f.cells:
                a = _exact_union(c.marks)
                ref = nu_eval(lam, a)
                emp = empirical_nu(doubling(), obs, ts, a, span_q(a, 2))
                rel.append(float(abs(Fraction(emp) - Fraction(ref)) / Fraction(ref)))
        ok_emp = max(rel) < 1e-6
        if self.out is not None:
            write_table(self.path("c08_nu_checks.csv"), ["spec", "set", "nu_eval", "monte_carlo", "sigma", "z"],
                        [[c[0], c[1], c[2], c[3], c[4], float(z)] for c, z in zip(checks, zs)])
        return Outcome(8, "outer measure: formula vs Monte Carlo vs exact geometry", ok_mc and ok_emp,
                       {"mc_checks": m, "bonferroni_z": zc, "max_abs_z": float(max(abs(z) for z in zs)),
                        "beyond_3sigma": int(sum(abs(z) > 3 for z in zs)),
                        "empirical_nu_max_relative_error": max(rel), "empirical_nu_sets": len(rel), "n": n})

    # 9: extremal process --------------------------------------------------------
    def c09(self):
        b = self.doubling_batch()
        z = b.z_values(1.0)
        ys = np.linspace(0.2, TAU_MAX, 50)
        emp = np.array([np.mean(z >= y) for y in ys])
        ref = np.exp(-0.5 * ys)
        sup = float(np.max(np.abs(emp - ref)))
        if self.out is not None:
            write_table(self.path("c09_survival.csv"), ["y", "empirical", "reference"],
                        [[float(y), float(e), float(r)] for y, e, r in zip(ys, emp, ref)])
        return Outcome(9, "extremal process one-time law, doubling map", sup < 0.01,
                       {"sup_distance": sup, "runs": b.n_runs, "grid_points": len(ys), "threshold": 0.01})

    # 10: records without clustering -------------------------------------------
    def c10(self):
        rng = np.random.default_rng(self.ss(10))
        k = int.from_bytes(rng.bytes(12), "big") | 1
        zeta = Fraction(k, 2**96)
        obs = ObservableSpec("g1", (zeta,))
        b = run_orbits(doubling(), obs, N_ACC, 10_000, self.ss(10, 1), tau_max=TAU_MAX, lookahead=1, records=True)
        a, c = RECORD_WINDOW
        counts = b.record_counts(a, c)
        mean = float(counts.mean())
        ref = math.log(c / a)
        rep = chi_square_pmf(counts, lambda kk: record_law_pmf(a, c, kk), f"logPoisson({a},{c})", 0,
                             test="chi2_records")
        if self.out is not None:
            write_freq_table(self.path("c10_record_counts.csv"), counts, lambda kk: record_law_pmf(a, c, kk), 0)
        ok = abs(mean - ref) <= 0.1 and rep.passed
        return Outcome(10, "record counts, doubling map, non-periodic zeta", ok,
                       {"zeta": f"{k}/2^96", "mean": mean, "reference_mean": ref, "runs": b.n_runs,
                        "void_fraction": float(np.mean(counts == 0)), "void_reference": a / c}, [rep])

    # 11: two-site example ------------------------------------------------------
    def c11(self):
        spec, obs = tripling(), ObservableSpec.two_site()
        q = choose_q(spec, obs, ThresholdScheme(obs, N_ACC))
        b = run_orbits(spec, obs, N_ACC, 3000, self.ss(11), tau_max=TAU_MAX, lookahead=8, records=True)
        cs = b.clusters(q)
        frac2 = float(np.mean(cs.sizes == 2))
        reps, k, m = self._void_grid(b.ensemble(), OuterMeasureSpec.mixture(Fraction(10, 11), Fraction(1, 11),
                                                                             Fraction(10, 3)), "c11")
        a, c = RECORD_WINDOW
        counts = b.record_counts(a, c).astype(float)
        ref = math.log(c / a)
        se = float(counts.std(ddof=1) / math.sqrt(len(counts)))
        z = (counts.mean() - ref) / se
        ok_theta = 0.89 <= cs.theta_aq <= 0.93 and 0.89 <= cs.theta_cc <= 0.93
        ok_frac = 0.08 <= frac2 <= 0.12
        ok_void = k >= math.ceil(0.95 * m)
        ok_rec = z > 3
        return Outcome(11, "two-site observable on the tripling map", ok_theta and ok_frac and ok_void and ok_rec,
                       {"q": q, "theta_aq": cs.theta_aq, "theta_cc": cs.theta_cc, "theta_reference": 10 / 11,
                        "size2_fraction": frac2, "size2_reference": 0.1, "void_cells_passed": k, "void_cells": m,
                        "record_mean": float(counts.mean()), "record_se": se, "log_poisson_mean": ref,
                        "excess_z": float(z), "record_ratio": float(counts.mean() / ref),
                        "derived_ratio": 11 / 10, "runs": b.n_runs,
                        "checks": {"theta": ok_theta, "size2": ok_frac, "voids": ok_void, "records": ok_rec}},
                       reps)

    # 12: D' diagnostic -------------------------------------------------------------
    def c12(self):
        obs = ObservableSpec("g1", (0,))
        rows = []
        for k in range(10, 17):
            n = 2**k
            an = mark_set(ThresholdScheme(obs, n), band((0, 1)))
            d1 = dprime_diagnostic(doubling(), an, 1, n // 32, n)
            d0 = dprime_diagnostic(doubling(), an, 0, n // 32, n)
            rows.append((k, Fraction(d1), Fraction(d0)))
        q1 = [r[1] for r in rows]
        q0 = [r[2] for r in rows]
        dec = all(x > y for x, y in zip(q1, q1[1:]))
        away = min(q0) >= Fraction(1, 2)
        if self.out is not None:
            write_table(self.path("c12_dprime.csv"), ["log2_n", "q1_exact", "q1", "q0_exact", "q0"],
                        [[k, str(a), float(a), str(b_), float(b_)] for k, a, b_ in rows])
        return Outcome(12, "D' sum along n = 2^10..2^16", dec and away,
                       {"q1": [float(x) for x in q1], "q0": [float(x) for x in q0], "k_n": "n/32",
                        "band": "(0, 1]", "q1_decreasing": dec, "q0_min": float(min(q0))})

    # 13: A^(q) versus A -----------------------------------------------------------
    def c13(self):
        b = self.doubling_batch().subset(5000)
        q = 1
        ens = b.ensemble()
        rows, ok = [], True
        for i, f in enumerate(standard_families()):
            va = void_from_counts(ens.counts(f))
            vq = void_from_counts(b.aq_counts(f, q))
            tau_sum = sum(float(c.marks.sup) for c in f.cells)
            bound = q * tau_sum / b.n + 2 * max(va.width, vq.width)
            diff = abs(vq.p - va.p)
            ok &= diff <= bound
            rows.append([i, va.p, vq.p, diff, bound])
        if self.out is not None:
            write_table(self.path("c13_aq_bound.csv"), ["family", "void_A", "void_Aq", "difference", "bound"], rows)
        return Outcome(13, "A^(q) versus A void probabilities", bool(ok),
                       {"families": len(rows), "max_difference": max(r[3] for r in rows),
                        "min_slack": min(r[4] - r[3] for r in rows)})

    # 14: projection h ---------------------------------------------------------------
    def c14(self):
        res = {}
        ok = True
        for n in (4, 10, 100, 1000, 10**6):
            pm = PointMeasure.from_atoms([(1 - 2 / n, 2.0), (1.0, 1.0)], horizon=2.0)
            got = h_record_projection(pm).times.tolist()
            want = [1 - 2 / n, 1.0]
            res[f"n={n}"] = got
            ok &= got == want
        lim = h_record_projection(PointMeasure.from_atoms([(1.0, 2.0), (1.0, 1.0)], horizon=2.0)).times.tolist()
        ok &= lim == [1.0]
        res["limit"] = lim
        return Outcome(14, "record projection h at a stacked limit", bool(ok), res)

    # 15: reproducibility ----------------------------------------------------------
    def c15(self):
        import tempfile

        from . import cli

        with tempfile.TemporaryDirectory() as tmp:
            hashes, codes = [], []
            for rep in ("a", "b"):
                d = Path(tmp) / rep
                codes.append(cli.main(["compare", "--suite", "acceptance", "--only", "8,12,14",
                                       "--seed", str(self.seed), "--out", str(d / "suite"), "--quiet"]))
                codes.append(cli.main(["limit-sample", "--law", "stacked_geometric:alpha=3/2,d=1", "-M", "50",
                                       "--seed", str(self.seed), "--out", str(d / "limit"), "--quiet"]))
                hashes.append(sha256_tree(d))
        same = hashes[0] == hashes[1]
        return Outcome(15, "byte-identical artifacts on re-run", same and len(hashes[0]) > 0,
                       {"files": len(hashes[0]), "identical": same, "exit_codes": codes})


def span_q(a: IntervalUnion, alpha) -> int:
    """Memory depth at a fixed point covering the geometric span of a band family.

    Points of ``A^(1)`` lie above ``lo = min(r_1 / alpha, l_2)``; once
    ``alpha^q lo`` exceeds ``sup A`` no later stack member can re-enter A.
    """
    iv = list(a)
    lo = Fraction(iv[0][1]) / alpha
    if len(iv) > 1:
        lo = min(lo, Fraction(iv[1][0]))
    q = 1
    while Fraction(alpha) ** q * lo < Fraction(a.sup):
        q += 1
    return q


def _random_union(rng) -> IntervalUnion:
    """1-3 disjoint intervals with endpoints on the 1/1024 grid in (0, 10]."""
    k = int(rng.integers(1, 4))
    pts = np.sort(rng.choice(np.arange(1, 10 * 1024 + 1), size=2 * k, replace=False))
    pairs = [(Fraction(int(pts[2 * i]), 1024), Fraction(int(pts[2 * i + 1]), 1024)) for i in range(k)]
    return IntervalUnion(pairs, closed="right")


def _exact_union(a: IntervalUnion) -> IntervalUnion:
    return IntervalUnion([(Fraction(x), Fraction(y)) for x, y in a], closed=a.closed)
