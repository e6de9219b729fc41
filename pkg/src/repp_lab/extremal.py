"""Extremal paths, the projections h1/h2/h3/h, and record processes."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .empirical import PointEnsemble, PointMeasure, taus_of
from .errors import DataError, DomainError
from .observables import ThresholdScheme


@dataclass
class StepPath:
    """Piecewise-constant path on ``[0, horizon)``.

    ``values[i]`` holds on ``[t_i, t_{i+1})`` when ``closed == "left"``
    (right-continuous) and on ``(t_i, t_{i+1}]`` when ``closed == "right"``.
    Before the first breakpoint the path equals ``initial``.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    horizon: float = math.inf
    initial: float = math.inf
    closed: str = "left"

    def __post_init__(self):
        self.breakpoints = np.asarray(self.breakpoints, dtype=float).reshape(-1)
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if len(self.breakpoints) != len(self.values):
            raise DataError("breakpoints and values differ in length")
        if np.any(np.diff(self.breakpoints) <= 0):
            raise DataError("breakpoints must be strictly increasing")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        side = "right" if self.closed == "left" else "left"
        i = np.searchsorted(self.breakpoints, t, side=side) - 1
        vals = np.concatenate([[self.initial], self.values])
        out = vals[i + 1]
        return out if out.ndim else float(out)

    def __len__(self):
        return len(self.breakpoints)

    def __eq__(self, other):
        if not isinstance(other, StepPath):
            return NotImplemented
        return (np.array_equal(self.breakpoints, other.breakpoints)
                and np.array_equal(self.values, other.values)
                and self.initial == other.initial and self.closed == other.closed)

    def jump_times(self) -> np.ndarray:
        prev = np.concatenate([[self.initial], self.values[:-1]])
        return self.breakpoints[self.values != prev]

    def is_nonincreasing(self) -> bool:
        v = np.concatenate([[self.initial], self.values])
        return bool(np.all(np.diff(v) <= 0))

    def to_csv(self, fh):
        fh.write("t,value\n")
        for t, v in zip(self.breakpoints, self.values):
            fh.write(f"{t:.17g},{v:.17g}\n")


def _running_records(t, y):
    """Breakpoints of ``inf{y_i : t_i <= t}`` for atoms sorted by time."""
    if len(t) == 0:
        return np.empty(0), np.empty(0)
    ut, first = np.unique(t, return_index=True)
    gmin = np.minimum.reduceat(y, first)
    run = np.minimum.accumulate(gmin)
    prev = np.concatenate([[np.inf], run[:-1]])
    keep = run < prev
    return ut[keep], run[keep]


def _scalar_marks(pm: PointMeasure):
    if pm.mark_dim != 1:
        raise DomainError("projections need scalar marks")
    return pm.marks[:, 0]


def h1_project(pm: PointMeasure) -> StepPath:
    """``h1 m(t) = inf{y_i : t_i <= t}``; ``+inf`` before the first atom."""
    y = _scalar_marks(pm)
    order = np.lexsort((y, pm.times))
    bp, val = _running_records(pm.times[order], y[order])
    return StepPath(bp, val, pm.horizon, math.inf, "left")


def h2_project(pm: PointMeasure, horizon_value: float | None = None) -> StepPath:
    """``h2 m(y) = inf{t_i : y_i < y}``, the first-passage time below level y.

    Non-increasing and left-continuous in y; equals ``horizon_value``
    (default: the window horizon) where no atom lies below y.
    """
    y = _scalar_marks(pm)
    H = pm.horizon if horizon_value is None else horizon_value
    order = np.lexsort((pm.times, y))
    bp, val = _running_records(y[order], pm.times[order])
    return StepPath(bp, val, math.inf, H, "right")


def extremal_path(marks, ts: ThresholdScheme | int, horizon: float | None = None) -> StepPath:
    """``Z_n(t) = u_n^{-1}(M_{floor(nt)+1})`` from the mark series ``u_n^{-1}(X_j)``."""
    n = ts.n if isinstance(ts, ThresholdScheme) else int(ts)
    m = np.asarray(marks, dtype=float)
    H = len(m) / n if horizon is None else horizon
    j = np.arange(len(m))
    keep = j < H * n
    bp, val = _running_records(j[keep] / n, m[keep])
    return StepPath(bp, val, H, math.inf, "left")


def extremal_path_from_values(values, ts: ThresholdScheme, horizon=None) -> StepPath:
    return extremal_path(taus_of(ts, values), ts, horizon)


# ---------------------------------------------------------------------------
# records


@dataclass
class RecordSeries:
    times: np.ndarray
    raw: np.ndarray
    normalized: np.ndarray | None = None
    length: int = 0

    def __len__(self):
        return len(self.times)


def record_times(values, ts: ThresholdScheme | None = None) -> RecordSeries:
    """Strict records ``X_j > max(X_0..X_{j-1})``; index 0 is always a record."""
    x = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DataError("record extraction needs finite values")
    if len(x) == 0:
        return RecordSeries(np.empty(0, np.int64), np.empty(0), None, 0)
    prev = np.concatenate([[-np.inf], np.maximum.accumulate(x)[:-1]])
    j = np.flatnonzero(x > prev)
    norm = taus_of(ts, x[j]) if ts is not None else None
    return RecordSeries(j, x[j], norm, len(x))


def record_times_from_marks(marks) -> RecordSeries:
    """Records of a mark series (strictly new minima); raw values are the marks."""
    m = np.asarray(marks, dtype=float)
    if len(m) == 0:
        return RecordSeries(np.empty(0, np.int64), np.empty(0), np.empty(0), 0)
    prev = np.concatenate([[np.inf], np.minimum.accumulate(m)[:-1]])
    j = np.flatnonzero(m < prev)
    return RecordSeries(j, m[j], m[j], len(m))


def record_pp(rs: RecordSeries, n: int, horizon: float | None = None):
    """``(R_n, W_n)``: atoms at ``t_k/n`` and at the normalised record values.

    ``W_n`` is ``None`` when the series was extracted without a threshold scheme.
    """
    H = rs.length / n if horizon is None else horizon
    sel = rs.times < H * n
    R = PointMeasure(rs.times[sel] / n, np.empty((int(sel.sum()), 0)), H)
    if rs.normalized is None:
        return R, None
    W = PointMeasure(np.asarray(rs.normalized)[sel], np.empty((int(sel.sum()), 0)), math.inf)
    return R, W


def record_law_pmf(a, b, k: int) -> float:
    """``(a/b) log(b/a)^k / k!``: Poisson(log(b/a)) counts of the 1/t intensity on (a, b)."""
    a, b = float(a), float(b)
    if not (0 < a < b):
        raise DomainError("need 0 < a < b")
    if k < 0:
        return 0.0
    lam = math.log(b / a)
    if k == 0:
        return a / b
    return math.exp(math.log(a / b) + k * math.log(lam) - math.lgamma(k + 1))


def h3_jumps(path: StepPath) -> PointMeasure:
    """One atom per jump; a first breakpoint that leaves ``initial`` counts."""
    jt = path.jump_times()
    jt = jt[jt < path.horizon]
    return PointMeasure(jt, np.empty((len(jt), 0)), path.horizon)


def record_atoms(run_id, times, marks):
    """Vectorised h over many measures: boolean mask of record atoms.

    Atom i is a record iff its mark is strictly below every other mark at
    times ``<= t_i`` in its run; at the run's first atom time the comparison
    is closed (``<=``), so a minimal stack base there always counts.
    """
    run_id = np.asarray(run_id, np.int64)
    t = np.asarray(times, float)
    y = np.asarray(marks, float)
    N = len(t)
    out = np.zeros(N, dtype=bool)
    if N == 0:
        return out
    order = np.lexsort((y, t, run_id))
    r, tt, yy = run_id[order], t[order], y[order]
    new_group = np.ones(N, dtype=bool)
    new_group[1:] = (r[1:] != r[:-1]) | (tt[1:] != tt[:-1])
    gstart = np.flatnonzero(new_group)
    gid = np.cumsum(new_group) - 1
    grun = r[gstart]
    gmin = yy[gstart]  # sorted by mark inside each group
    gsize = np.diff(np.append(gstart, N))
    second = np.where(gsize > 1, yy[np.minimum(gstart + 1, N - 1)], np.inf)
    # segmented running minimum of earlier groups, exact via integer ranks
    rank = np.empty(len(gmin), np.int64)
    rank[np.lexsort((gmin,))] = np.arange(len(gmin))
    G = len(gmin)
    key = rank - grun * G
    cum = np.minimum.accumulate(key)
    prev = np.concatenate([[np.iinfo(np.int64).max], cum[:-1]])
    first_group = np.ones(G, dtype=bool)
    first_group[1:] = grun[1:] != grun[:-1]
    by_rank = np.sort(gmin)
    prev_val = np.where(first_group, np.inf, by_rank[np.clip(prev + grun * G, 0, G - 1)])
    is_min = np.zeros(N, dtype=bool)
    is_min[gstart] = True
    g = gid
    strict_group = (gmin < prev_val) & (gmin < second)
    rec = np.where(first_group[g], yy == gmin[g], is_min & strict_group[g])
    out[order] = rec
    return out


def h_record_projection(pm: PointMeasure) -> PointMeasure:
    """``h(m)``: one atom at the time of every record atom of m."""
    y = _scalar_marks(pm)
    mask = record_atoms(np.zeros(len(pm), np.int64), pm.times, y)
    t = pm.times[mask]
    return PointMeasure(t, np.empty((len(t), 0)), pm.horizon)


def record_counts(ens: PointEnsemble, a: float, b: float) -> np.ndarray:
    """Per-run number of h-records with time in ``(a, b)``."""
    if ens.marks.shape[1] != 1:
        raise DomainError("record projection needs scalar marks")
    mask = record_atoms(ens.run_id, ens.times, ens.marks[:, 0])
    sel = mask & (ens.times > a) & (ens.times < b)
    return np.bincount(ens.run_id[sel], minlength=ens.n_runs)
