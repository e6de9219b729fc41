"""Empirical rare-events point processes, A^(q) sets, clusters and diagnostics."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy import stats as sps

from .errors import DataError, DomainError, IntervalCapError, QSelectionError, ResolutionError, UnsupportedOperation
from .intervals import BoxUnion, IntervalUnion, union_all
from .observables import ObservableSpec, ThresholdScheme, unit_ball_volume
from .systems import (
    DIGIT_SHIFT,
    INTERVAL_CAP,
    PiMultiple,
    digits_floor,
    SystemSpec,
    as_real,
    jacobian_at,
    min_return_time,
    period_of,
    preimage,
)

TAU_MAX = 10


# ---------------------------------------------------------------------------
# point measures


@dataclass
class PointMeasure:
    """Finitely many atoms ``(t, marks)`` on the window ``[0, H) x bounds``."""

    times: np.ndarray
    marks: np.ndarray
    horizon: float = 1.0
    bounds: tuple | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        m = np.asarray(self.marks, dtype=float)
        if m.ndim == 1:
            m = m.reshape(len(t), -1) if len(t) else m.reshape(0, 1 if m.size else 0)
        if len(m) != len(t):
            raise DataError("times and marks differ in length")
        if len(t) and (t.min() < 0 or t.max() >= self.horizon):
            raise DataError("atom time outside [0, H)")
        if self.bounds is not None and len(t) and m.shape[1]:
            lo, hi = self.bounds
            if m.shape[1] == 1 and (m[:, 0].min() < lo or m[:, 0].max() > hi):
                raise DataError("mark outside the declared bounds")
        keys = [t] if not m.shape[1] else [m[:, 0], t]
        order = np.lexsort(keys)
        self.times = t[order]
        self.marks = m[order]

    @classmethod
    def empty(cls, horizon=1.0, mark_dim=1, bounds=None):
        return cls(np.empty(0), np.empty((0, mark_dim)), horizon, bounds)

    @classmethod
    def from_atoms(cls, atoms: Iterable, horizon=1.0, bounds=None):
        atoms = list(atoms)
        if not atoms:
            return cls.empty(horizon, 1, bounds)
        t = [a[0] for a in atoms]
        m = [np.atleast_1d(a[1]) if len(a) > 1 else np.empty(0) for a in atoms]
        return cls(np.array(t, float), np.array(m, float), horizon, bounds)

    @property
    def mark_dim(self):
        return self.marks.shape[1]

    def __len__(self):
        return len(self.times)

    def atoms(self):
        return [(float(t), tuple(float(v) for v in m)) for t, m in zip(self.times, self.marks)]

    def __eq__(self, other):
        if not isinstance(other, PointMeasure):
            return NotImplemented
        return (self.horizon == other.horizon and np.array_equal(self.times, other.times)
                and np.array_equal(self.marks, other.marks))


@dataclass
class PointEnsemble:
    """Independent point measures stored flat: atom i belongs to run ``run_id[i]``."""

    run_id: np.ndarray
    times: np.ndarray
    marks: np.ndarray
    n_runs: int
    horizon: float = 1.0
    weights: np.ndarray | None = None

    @classmethod
    def from_measures(cls, pms: Sequence[PointMeasure]):
        if not pms:
            raise DataError("empty ensemble")
        rid = np.concatenate([np.full(len(p), i, dtype=np.int64) for i, p in enumerate(pms)])
        t = np.concatenate([p.times for p in pms])
        m = np.concatenate([p.marks for p in pms]) if len(t) else np.empty((0, pms[0].mark_dim))
        return cls(rid, t, m, len(pms), pms[0].horizon)

    def __len__(self):
        return self.n_runs

    def measure(self, r: int) -> PointMeasure:
        sel = self.run_id == r
        return PointMeasure(self.times[sel], self.marks[sel], self.horizon)

    def counts(self, fam: "RectangleFamily") -> np.ndarray:
        """Per-run counts, shape ``(n_runs, n_cells)``."""
        out = np.zeros((self.n_runs, len(fam.cells)), dtype=np.int64)
        for k, cell in enumerate(fam.cells):
            sel = cell.mask(self.times, self.marks)
            w = None if self.weights is None else self.weights[sel]
            out[:, k] = np.bincount(self.run_id[sel], weights=w, minlength=self.n_runs).astype(np.int64)
        return out


@dataclass(frozen=True)
class Cell:
    """``J x A`` with ``J = [a, b)``; ``A`` is a mark set or ``None`` (time only)."""

    a: float
    b: float
    marks: IntervalUnion | BoxUnion | None = None

    def mask(self, times, marks):
        sel = (times >= self.a) & (times < self.b)
        if self.marks is None:
            return sel
        if isinstance(self.marks, IntervalUnion):
            return sel & self.marks.contains_array(marks[:, 0])
        return sel & self.marks.contains_array(marks) if len(marks) else sel

    @property
    def duration(self):
        return self.b - self.a

    def leb(self):
        if self.marks is None:
            return self.duration
        return self.duration * self.marks.measure()


def band(*pairs) -> IntervalUnion:
    """Mark band ``(lo, hi] u ...`` using the right-closed convention."""
    return IntervalUnion(pairs, closed="right")


@dataclass(frozen=True)
class RectangleFamily:
    cells: tuple

    def __post_init__(self):
        cells = tuple(c if isinstance(c, Cell) else Cell(*c) for c in self.cells)
        object.__setattr__(self, "cells", cells)
        prev = 0
        for c in cells:
            if not (c.a >= prev and c.a < c.b):
                raise DomainError("time intervals must be ordered, disjoint and nonempty")
            prev = c.b
            if isinstance(c.marks, IntervalUnion) and c.marks.closed != "right":
                object.__setattr__(c, "marks", IntervalUnion(c.marks.intervals, closed="right"))

    @classmethod
    def single(cls, a, b, marks=None):
        return cls((Cell(a, b, marks),))

    def __len__(self):
        return len(self.cells)

    def to_list(self):
        out = []
        for c in self.cells:
            out.append({"J": [c.a, c.b], "A": None if c.marks is None else c.marks.to_list()})
        return out


def count_in(pm: PointMeasure, fam: RectangleFamily) -> np.ndarray:
    """Counts per cell: time in ``[a, b)``, mark in ``(lo, hi]``."""
    return np.array([int(c.mask(pm.times, pm.marks).sum()) for c in fam.cells], dtype=np.int64)


# ---------------------------------------------------------------------------
# builders


def build_repp1(values, u, n: int, horizon: float | None = None) -> PointMeasure:
    """Atoms at ``j/n`` for every ``X_j > u``."""
    x = np.asarray(values, dtype=float)
    H = len(x) / n if horizon is None else horizon
    j = np.flatnonzero(x > u)
    return PointMeasure(j / n, np.empty((len(j), 0)), H)


def build_repp2(values, ts: ThresholdScheme, tau_max=TAU_MAX, indices=None, horizon=None,
                unresolved=None) -> PointMeasure:
    """Atoms ``(j/n, u_n^{-1}(X_j))`` with marks at most ``tau_max``.

    ``indices`` gives the time index of each value when only a sparse subset
    of the orbit is supplied (``horizon`` is then required).
    """
    x = np.asarray(values, dtype=float)
    if indices is None:
        idx = np.arange(len(x))
        H = len(x) / ts.n if horizon is None else horizon
    else:
        idx = np.asarray(indices, dtype=np.int64)
        if horizon is None:
            raise DomainError("horizon required with sparse indices")
        H = horizon
    marks = taus_of(ts, x)
    keep = (marks <= tau_max) & (idx < H * ts.n)
    if unresolved is not None and np.any(np.asarray(unresolved)[keep]):
        raise ResolutionError("unresolved orbit distance inside the REPP window; escalate the resolution")
    return PointMeasure(idx[keep] / ts.n, marks[keep].reshape(-1, 1), H, (0, tau_max))


def taus_of(ts: ThresholdScheme, x: np.ndarray) -> np.ndarray:
    """Vectorised ``u_n^{-1}`` applied to observed values."""
    obs = ts.obs
    x = np.asarray(x, dtype=float)
    if obs.kind == "two_site":
        return 0.22 * ts.n * np.clip(1 - x, 0, None)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        if obs.kind == "g1":
            r = np.exp(-x)
        elif obs.kind == "g2":
            r = np.where(x > 0, x ** (-float(obs.a)), np.inf)
        else:
            c = float(obs.c)
            r = np.where(x < c, (c - x) ** float(obs.a), 0.0)
    return ts.marks_of_distances(r)


def multi_scale(ts: ThresholdScheme) -> float:
    """``g^{-1}(u_n(1)) * |B_1|^{1/d}``; equals ``n**(-1/d)`` for Lebesgue."""
    d = ts.obs.dimension
    return float(ts.distance_of_mark(1)) * float(unit_ball_volume(d)) ** (1.0 / d)


def build_repp_multi(offsets, ts: ThresholdScheme, radius: float, indices=None, horizon=None) -> PointMeasure:
    """Atoms ``(j/n, (T^j x - zeta) / scale)`` inside the normalised ball of ``radius``.

    ``offsets`` are signed chart coordinates ``T^j x - zeta`` (identity chart
    on the flat torus).
    """
    off = np.atleast_2d(np.asarray(offsets, dtype=float))
    if indices is None:
        idx = np.arange(len(off))
        H = len(off) / ts.n if horizon is None else horizon
    else:
        idx = np.asarray(indices, dtype=np.int64)
        H = horizon
    v = off / multi_scale(ts)
    keep = (np.linalg.norm(v, axis=1) <= radius) & (idx < H * ts.n)
    return PointMeasure(idx[keep] / ts.n, v[keep], H)


# ---------------------------------------------------------------------------
# exceedance geometry


def rational_approx(z, bits: int = 192):
    """Exact values pass through; pi multiples become dyadic approximants (error < 2**-bits)."""
    if isinstance(z, PiMultiple):
        return Fraction(digits_floor(z, 2, bits), 2**bits)
    return z


def mark_set(ts: ThresholdScheme, a: IntervalUnion) -> IntervalUnion:
    """Phase-space set ``{x : mark(x) in a}`` (one-dimensional observables)."""
    obs = ts.obs
    if obs.dimension != 1:
        raise UnsupportedOperation("mark sets are interval unions only in dimension 1")
    n = ts.n
    if obs.kind == "two_site":
        # the second site is the image of the first under 3x mod 1
        c1 = rational_approx(obs.zeta[0])
        sites = [(c1, Fraction(1, 22)), ((3 * c1) % 1, Fraction(10, 22))]
    else:
        sites = [(rational_approx(obs.zeta[0]), None)]
    parts = []
    for lo, hi in a:
        for centre, k in sites:
            def rad(t):
                return k * t / n if k is not None else ts.distance_of_mark(t)
            outer = IntervalUnion.ball(centre, rad(hi))
            inner = IntervalUnion.ball(centre, rad(lo)) if lo > 0 else IntervalUnion.empty()
            parts.append(outer.difference(inner))
    return union_all(parts)


def _pull_back(pieces, target: IntervalUnion):
    """Parts of the pieces whose current image lies in ``target`` (mod 1)."""
    out = []
    for a, c, s, o in pieces:
        ya, yc = s * a + o, s * c + o
        if yc < ya:
            ya, yc = yc, ya
        for m in range(math.floor(ya), math.ceil(yc)):
            for lo, hi in target.translate(m).intersection(IntervalUnion([(ya, yc)])):
                xa, xb = (lo - o) / s, (hi - o) / s
                out.append((min(xa, xb), max(xa, xb)))
    return IntervalUnion(out)


def _advance(pieces, branches):
    """Compose every piece's affine map with one more application of T."""
    out = []
    for a, c, s, o in pieces:
        ya, yc = s * a + o, s * c + o
        if yc < ya:
            ya, yc = yc, ya
        for m in range(math.floor(ya), math.ceil(yc)):
            for br in branches:
                lo, hi = max(ya, br.lo + m), min(yc, br.hi + m)
                if lo >= hi:
                    continue
                xa, xb = (lo - o) / s, (hi - o) / s
                xa, xb = min(xa, xb), max(xa, xb)
                out.append((xa, xb, br.slope * s, br.slope * (o - m) + br.offset))
        if len(out) > INTERVAL_CAP:
            raise IntervalCapError("forward pieces exceed the interval cap")
    return out


def aq_set(a: IntervalUnion, spec: SystemSpec, q: int) -> IntervalUnion:
    """``A^(q) = A \\ U_{i=1..q} T^{-i} A`` (points whose next q iterates leave A).

    Works forward from the components of A, so only the parts of
    ``T^{-i} A`` inside A are ever built.
    """
    if q < 0:
        raise DomainError("q must be nonnegative")
    branches = spec.affine_branches()
    pieces = [(lo, hi, 1, 0) for lo, hi in a]
    out = a
    for _ in range(q):
        pieces = _advance(pieces, branches)
        out = out.difference(_pull_back(pieces, a))
        if out.is_empty():
            break
    return IntervalUnion(out.intervals, closed=a.closed)


def q_prime(p: int, tau_min, tau_max, d: int, alpha: float) -> int:
    return p * math.ceil((math.log(tau_max) - math.log(tau_min)) / (d * math.log(alpha)) - 1e-12)


def _return_profile(spec, ts, a, j, ladder, horizon):
    prof = []
    for k in range(ladder):
        tsk = ThresholdScheme(ts.obs, ts.n * 16**k, ts.model)
        aq = aq_set(mark_set(tsk, a), spec, j)
        r = math.inf if aq.is_empty() else min_return_time(spec, aq, horizon)
        prof.append(math.inf if r is None else r)
    return prof


def _grows(prof):
    # return times at generic points fluctuate, so only net growth is required
    if all(math.isinf(r) for r in prof):
        return True
    return prof[-1] > prof[0] + 1


def choose_q(spec: SystemSpec, obs: ObservableSpec, ts: ThresholdScheme, tau_range=(0, TAU_MAX),
             horizon: int = 128, ladder: int = 6, cap: int = 24) -> int:
    """Smallest admissible memory depth q by the return-time ladder.

    A candidate j qualifies when the minimal return time of ``A_n^(j)``
    grows along the ladder ``n, 16n, 256n, ...``. At periodic points the candidates
    are multiples of the period; with ``tau_min > 0`` the scan starts from
    ``q' = p * ceil(log(tau_max/tau_min) / (d log alpha))``.
    """
    tmin, tmax = tau_range
    a = band((tmin, tmax))
    p = None
    if obs.kind != "two_site":
        p = period_of(spec, obs.zeta)
    step = p or 1
    if p is not None and tmin > 0:
        J = jacobian_at(spec, obs.zeta, p)
        d = len(J)
        alpha = abs(float(np.linalg.det(J))) ** (1.0 / d)
        start = q_prime(p, tmin, tmax, d, alpha)
    else:
        start = 0
    profile = {}
    j = start
    while j <= cap:
        prof = _return_profile(spec, ts, a, j, ladder, horizon)
        profile[j] = prof
        if _grows(prof):
            return j
        j = j + step if j else step
    raise QSelectionError(f"no q <= {cap} has diverging return times", profile=profile)


# ---------------------------------------------------------------------------
# clusters


@dataclass
class ClusterSummary:
    starts: np.ndarray
    sizes: np.ndarray
    marks: list
    theta_aq: float
    theta_aq_se: float
    theta_cc: float
    theta_cc_se: float
    n_exceedances: int
    run_of_start: np.ndarray | None = None

    def to_dict(self):
        return {
            "n_exceedances": int(self.n_exceedances),
            "n_clusters": int(len(self.sizes)),
            "theta_aq": self.theta_aq,
            "theta_aq_se": self.theta_aq_se,
            "theta_cc": self.theta_cc,
            "theta_cc_se": self.theta_cc_se,
            "size_counts": {str(k): int(v) for k, v in zip(*np.unique(self.sizes, return_counts=True))},
        }


def _ratio_se(num, den):
    """Standard error of ``sum(num)/sum(den)`` from per-run totals."""
    num = np.asarray(num, float)
    den = np.asarray(den, float)
    tot = den.sum()
    if tot == 0:
        return math.nan
    r = num.sum() / tot
    m = len(den)
    if m < 2:
        return math.sqrt(max(r * (1 - r), 0) / tot)
    resid = num - r * den
    return float(math.sqrt(m / (m - 1) * np.sum(resid**2)) / tot)


def cluster_analysis(run_id, idx, marks, q: int, end: int, n_runs: int | None = None) -> ClusterSummary:
    """Clusters over one or many runs.

    ``idx`` are exceedance indices (integers); entries with ``idx >= end``
    are look-ahead only: they decide whether a window exceedance ends its
    cluster but are not counted themselves.
    """
    run_id = np.asarray(run_id, dtype=np.int64)
    idx = np.asarray(idx, dtype=np.int64)
    marks = np.asarray(marks, dtype=float)
    if n_runs is None:
        n_runs = int(run_id.max()) + 1 if len(run_id) else 1
    order = np.lexsort((idx, run_id))
    run_id, idx, marks = run_id[order], idx[order], marks[order]
    same_next = np.zeros(len(idx), dtype=bool)
    same_next[:-1] = run_id[1:] == run_id[:-1]
    gap_next = np.full(len(idx), np.iinfo(np.int64).max)
    gap_next[:-1] = np.where(same_next[:-1], idx[1:] - idx[:-1], gap_next[:-1])
    gap_prev = np.full(len(idx), np.iinfo(np.int64).max)
    gap_prev[1:] = np.where(same_next[:-1], idx[1:] - idx[:-1], gap_prev[1:])
    inw = idx < end
    start = inw & (gap_prev > q)
    ends = inw & (gap_next > q)
    w_idx = np.flatnonzero(inw)
    cid = np.cumsum(start)[w_idx] - 1
    n_cl = int(start.sum())
    sizes = np.bincount(cid, minlength=n_cl) if n_cl else np.zeros(0, dtype=np.int64)
    splits = np.flatnonzero(start[w_idx])[1:]
    cl_marks = np.split(marks[w_idx], splits) if n_cl else []
    E = np.bincount(run_id[inw], minlength=n_runs)
    C = np.bincount(run_id[start], minlength=n_runs)
    Q = np.bincount(run_id[ends], minlength=n_runs)
    n_exc = int(inw.sum())
    th_cc = C.sum() / n_exc if n_exc else math.nan
    th_aq = Q.sum() / n_exc if n_exc else math.nan
    return ClusterSummary(
        starts=idx[start], sizes=sizes.astype(np.int64), marks=cl_marks,
        theta_aq=float(th_aq), theta_aq_se=_ratio_se(Q, E) if n_exc else math.nan,
        theta_cc=float(th_cc), theta_cc_se=_ratio_se(C, E) if n_exc else math.nan,
        n_exceedances=n_exc, run_of_start=run_id[start],
    )


def clusters(idx, marks, q: int, end: int | None = None) -> ClusterSummary:
    """Clusters of one exceedance series: gaps ``<= q`` merge."""
    idx = np.asarray(idx, dtype=np.int64)
    if end is None:
        end = int(idx.max()) + 1 if len(idx) else 0
    return cluster_analysis(np.zeros(len(idx), dtype=np.int64), idx, marks, q, end, 1)


# ---------------------------------------------------------------------------
# D'_q diagnostic


def _periodic_cumulative(k: IntervalUnion, y: Fraction) -> Fraction:
    """``|{s in [0, y) : frac(s) in k}|``."""
    fl = math.floor(y)
    fr = y - fl
    return fl * k.measure() + k.intersection(IntervalUnion([(0, fr)])).measure()


def _overlap_shift(spec: SystemSpec, i_set: IntervalUnion, k_set: IntervalUnion, j: int):
    """``mu(I cap T^{-j} K)`` for Lebesgue measure."""
    if spec.kind == DIGIT_SHIFT and spec.dimension == 1:
        bj = spec.bases[0] ** j
        return sum(((_periodic_cumulative(k_set, bj * c) - _periodic_cumulative(k_set, bj * a)) / bj
                    for a, c in i_set), Fraction(0))
    pre = k_set
    for _ in range(j):
        pre = preimage(spec, pre)
    return i_set.intersection(pre).measure()


def dprime_diagnostic(spec: SystemSpec, a_n: IntervalUnion, q: int, k_n, n: int):
    """``n * sum_{j=1}^{floor(n/k_n)-1} mu(A^(q) cap T^{-j} A^(q))`` (exact)."""
    aq = aq_set(a_n, spec, q)
    if aq.is_empty():
        return 0
    if any(isinstance(v, float) for pair in aq for v in pair):
        aq = IntervalUnion([(Fraction(x), Fraction(y)) for x, y in aq])
    top = math.floor(Fraction(n) / Fraction(k_n)) - 1
    total = sum((_overlap_shift(spec, aq, aq, j) for j in range(1, top + 1)), Fraction(0))
    return n * total


# ---------------------------------------------------------------------------
# void probabilities


@dataclass(frozen=True)
class VoidEstimate:
    p: float
    lo: float
    hi: float
    n_runs: int
    n_void: int

    @property
    def width(self):
        return self.hi - self.lo

    def to_dict(self):
        return {"p": self.p, "ci": [self.lo, self.hi], "n_runs": self.n_runs, "n_void": self.n_void}


def wilson(k: int, n: int, level: float = 0.95):
    ci = sps.binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def void_from_counts(counts: np.ndarray) -> VoidEstimate:
    counts = np.asarray(counts)
    n = counts.shape[0]
    if n == 0:
        raise DataError("empty ensemble")
    k = int(np.sum(np.all(counts == 0, axis=1))) if counts.shape[1] else n
    lo, hi = wilson(k, n)
    return VoidEstimate(k / n, lo, hi, n, k)


def void_frequency(ensemble, fam: RectangleFamily) -> VoidEstimate:
    """Fraction of runs with every cell empty, with a Wilson 95% interval."""
    if isinstance(ensemble, PointEnsemble):
        if ensemble.n_runs == 0:
            raise DataError("empty ensemble")
        return void_from_counts(ensemble.counts(fam))
    ensemble = list(ensemble)
    if not ensemble:
        raise DataError("empty ensemble")
    return void_from_counts(np.array([count_in(pm, fam) for pm in ensemble]).reshape(len(ensemble), -1))


# ---------------------------------------------------------------------------
# persistence


def fmt17(v: float) -> str:
    return f"{v:.17g}"


def ensemble_to_csv(ens: PointEnsemble, fh, run_offset: int = 0, header: bool = True):
    m = ens.marks.shape[1]
    if header:
        fh.write(",".join(["run_id", "t"] + [f"mark{i + 1}" for i in range(m)]) + "\n")
    for r, t, mk in zip(ens.run_id, ens.times, ens.marks):
        fh.write(",".join([str(int(r) + run_offset), fmt17(float(t))] + [fmt17(float(v)) for v in mk]) + "\n")


def measure_to_csv(pm: PointMeasure, fh, run_id: int = 0):
    ens = PointEnsemble(np.full(len(pm), run_id), pm.times, pm.marks, 1, pm.horizon)
    ensemble_to_csv(ens, fh)


def read_csv(fh, horizon: float = 1.0, n_runs: int | None = None) -> PointEnsemble:
    rows = list(csv.reader(fh))
    if not rows:
        raise DataError("empty CSV")
    head = rows[0]
    if head[:2] != ["run_id", "t"]:
        raise DataError("CSV header must start with run_id,t")
    m = len(head) - 2
    body = rows[1:]
    rid = np.array([int(r[0]) for r in body], dtype=np.int64)
    t = np.array([float(r[1]) for r in body])
    mk = np.array([[float(v) for v in r[2:]] for r in body]).reshape(len(body), m)
    if n_runs is None:
        n_runs = int(rid.max()) + 1 if len(rid) else 0
    return PointEnsemble(rid, t, mk, n_runs, horizon)
