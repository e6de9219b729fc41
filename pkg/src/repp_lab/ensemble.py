"""Bulk orbit ensembles: exceedance atoms of many independent runs at once.

A run is a uniform random starting point followed for ``N = n * H`` steps
plus a short look-ahead. Run r, coordinate i draws digits from
``seed_sequence(seed, r, i)`` so any prefix of a large ensemble equals the
smaller ensemble with the same seed.

Per run only the candidate steps (distance below the window radius) leave
the vectorised scan; the full scan is about ``N`` integer operations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .empirical import (
    TAU_MAX,
    PointEnsemble,
    RectangleFamily,
    cluster_analysis,
    multi_scale,
)
from .errors import DomainError, ResolutionError, UnsupportedOperation
from .observables import AnalyticDensity, ObservableSpec, ThresholdScheme
from .systems import (
    DIGIT_SHIFT,
    DigitStream,
    SystemSpec,
    as_real,
    circle_dist_ints,
    digits_floor,
    digits_per_word,
    iterate_float,
    seed_sequence,
    near_mask,
    near_positions,
    window_matrix,
    windows_at,
)


@dataclass
class OrbitBatch:
    """Exceedance atoms (mark <= tau_max) of M runs, window plus look-ahead.

    ``idx`` are step indices; entries with ``idx >= N`` are look-ahead.
    ``offsets`` holds signed per-coordinate displacements ``T^j x - zeta``.
    """

    n: int
    N: int
    n_runs: int
    tau_max: float
    lookahead: int
    run_id: np.ndarray
    idx: np.ndarray
    marks: np.ndarray
    offsets: np.ndarray
    rec_run: np.ndarray | None = None
    rec_idx: np.ndarray | None = None
    rec_mark: np.ndarray | None = None
    unresolved: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def horizon(self) -> float:
        return self.N / self.n

    def subset(self, runs: int) -> "OrbitBatch":
        """The first ``runs`` runs (identical to a smaller ensemble)."""
        s = self.run_id < runs
        rs = None
        kw = {}
        if self.rec_run is not None:
            rs = self.rec_run < runs
            kw = dict(rec_run=self.rec_run[rs], rec_idx=self.rec_idx[rs], rec_mark=self.rec_mark[rs])
        return OrbitBatch(self.n, self.N, runs, self.tau_max, self.lookahead, self.run_id[s], self.idx[s],
                          self.marks[s], self.offsets[s], unresolved=self.unresolved, meta=dict(self.meta), **kw)

    def window(self, tau=None):
        """Mask of window atoms (``idx < N``), optionally with mark <= tau."""
        m = self.idx < self.N
        if tau is not None:
            m &= self.marks <= tau
        return m

    def ensemble(self) -> PointEnsemble:
        """2-D REPPs ``(j/n, mark)`` of all runs."""
        s = self.window()
        return PointEnsemble(self.run_id[s], self.idx[s] / self.n, self.marks[s].reshape(-1, 1), self.n_runs,
                             self.horizon)

    def multi_ensemble(self, ts: ThresholdScheme, radius: float) -> PointEnsemble:
        """Multi-dimensional REPPs ``(j/n, (T^j x - zeta)/scale)`` inside the radius."""
        v = self.offsets / multi_scale(ts)
        s = self.window() & (np.linalg.norm(v, axis=1) <= radius)
        return PointEnsemble(self.run_id[s], self.idx[s] / self.n, v[s], self.n_runs, self.horizon)

    def clusters(self, q: int, tau=None):
        s = self.marks <= (self.tau_max if tau is None else tau)
        if q > self.lookahead:
            raise DomainError(f"q={q} exceeds the recorded look-ahead {self.lookahead}")
        return cluster_analysis(self.run_id[s], self.idx[s], self.marks[s], q, self.N, self.n_runs)

    def z_values(self, t: float = 1.0) -> np.ndarray:
        """``Z_n(t)`` per run; ``inf`` where no atom with mark <= tau_max occurred."""
        last = math.floor(self.n * t)
        if last >= self.N + self.lookahead:
            raise DomainError("time beyond the recorded look-ahead")
        s = self.idx <= last
        out = np.full(self.n_runs, np.inf)
        np.minimum.at(out, self.run_id[s], self.marks[s])
        return out

    def aq_counts(self, fam: RectangleFamily, q: int) -> np.ndarray:
        """Per-run counts of ``A^(q)`` entries: atoms in a cell whose next q marks avoid the cell's set."""
        if q > self.lookahead:
            raise DomainError(f"q={q} exceeds the recorded look-ahead {self.lookahead}")
        order = np.lexsort((self.idx, self.run_id))
        r, j, mk = self.run_id[order], self.idx[order], self.marks[order]
        out = np.zeros((self.n_runs, len(fam.cells)), dtype=np.int64)
        t = j / self.n
        for k, c in enumerate(fam.cells):
            inA = c.marks.contains_array(mk) if c.marks is not None else np.ones(len(mk), bool)
            blocked = np.zeros(len(mk), dtype=bool)
            for s in range(1, q + 1):
                nxt = np.zeros(len(mk), dtype=bool)
                # atoms within s positions ahead in the sorted order cover all j' <= j + q
                if s < len(mk):
                    same = (r[s:] == r[:-s]) & (j[s:] - j[:-s] <= q) & inA[s:]
                    nxt[:-s] = same
                blocked |= nxt
            sel = inA & ~blocked & (t >= c.a) & (t < c.b) & (j < self.N)
            out[:, k] = np.bincount(r[sel], minlength=self.n_runs)
        return out

    def record_ensemble(self) -> PointEnsemble:
        """Record-time processes ``R_n`` with the normalised record values as marks."""
        if self.rec_run is None:
            raise DomainError("batch was run without record tracking")
        return PointEnsemble(self.rec_run, self.rec_idx / self.n, self.rec_mark.reshape(-1, 1), self.n_runs,
                             self.horizon)

    def record_counts(self, a: float, b: float) -> np.ndarray:
        if self.rec_run is None:
            raise DomainError("batch was run without record tracking")
        t = self.rec_idx / self.n
        s = (t > a) & (t < b)
        return np.bincount(self.rec_run[s], minlength=self.n_runs)


# ---------------------------------------------------------------------------
# scans


def _scale(base: int) -> float:
    return float(base) ** -digits_per_word(base)


def _refine(words, base, pos, z, digits):
    """Exact circle distance from ``digits`` digits (Python integers)."""
    D = digits_per_word(base)
    B = base**D
    k0, s = divmod(int(pos), D)
    k1 = (int(pos) + digits - 1) // D
    v = 0
    for w in words[k0:k1 + 1]:
        v = v * B + int(w)
    total = (k1 - k0 + 1) * D
    X = (v // base ** (total - s - digits)) % base**digits
    BK = base**digits
    Z = digits_floor(z, base, digits)
    diff = (X - Z) % BK
    d = min(diff, BK - diff)
    return float(Fraction(d, BK)), diff <= BK - diff, d <= 1


def _signed(dist_int, positive, base):
    d = dist_int.astype(float) * _scale(base)
    return np.where(positive, d, -d)


def _fix_unresolved(words, base, z, pos, dist_int, signed):
    """Refine steps with integer distance <= 1 using three words of digits."""
    bad = np.flatnonzero(dist_int <= 1)
    still = 0
    D = digits_per_word(base)
    for i in bad:
        if int(pos[i]) // D + 3 >= len(words):
            still += 1
            continue
        d, pos_side, unres = _refine(words, base, pos[i], z, 2 * D)
        signed[i] = d if pos_side else -d
        still += int(unres)
    return still


def _records(Wm, zints, weights, N, base, first_words=16):
    """Strict records of ``key_j = min_i weights[i] * dist_i(j)`` over positions ``j < N``.

    The running minimum only falls, so after an exhaustive first block each
    geometrically growing block is filtered to windows below the current
    minimum. Single-site keys stay integer (exact); weighted keys are float.
    Returns record positions and the per-site distances there (integer units,
    as floats).
    """
    D, nw = Wm.shape
    exact = len(zints) == 1
    cur = None
    out_pos, out_d = [], []
    k0, size = 0, first_words
    while k0 * D < N and k0 < nw:
        k1 = min(nw, k0 + size)
        sub = Wm[:, k0:k1]
        if cur is None:
            sel = np.ones(sub.shape, dtype=bool)
        else:
            sel = np.zeros(sub.shape, dtype=bool)
            for z, w in zip(zints, weights):
                sel |= near_mask(sub, z, int(cur) // w, base)
        s, k = np.divmod(np.flatnonzero(sel), sel.shape[1])
        pos = (k + k0) * D + s
        order = np.argsort(pos)
        pos, s, k = pos[order], s[order], k[order]
        live = pos < N
        pos, W = pos[live], sub[s[live], k[live]]
        dists = [circle_dist_ints(W, z, base)[0] for z in zints]
        if exact:
            key = dists[0]
        else:
            key = np.minimum.reduce([w * d.astype(float) for w, d in zip(weights, dists)])
        if len(key):
            run = np.minimum.accumulate(key)
            prev = np.empty_like(key)
            prev[1:] = run[:-1]
            if cur is None:
                rec = np.ones(len(key), dtype=bool)
                rec[1:] = key[1:] < prev[1:]
            else:
                prev[0] = cur
                rec = key < prev
            out_pos.append(pos[rec])
            out_d.append(np.stack([d[rec].astype(float) for d in dists]))
            cur = run[-1] if cur is None else min(cur, run[-1])
        k0, size = k1, size * 2
    if not out_pos:
        return np.empty(0, np.int64), np.empty((len(zints), 0))
    return np.concatenate(out_pos), np.concatenate(out_d, axis=1)


def _radius_int(r: float, base: int) -> int:
    return int(math.ceil(float(r) / _scale(base))) + 2


def run_orbits(spec: SystemSpec, obs: ObservableSpec, n: int, M: int, seed, tau_max: float = TAU_MAX,
               horizon: float = 1.0, lookahead: int = 8, records: bool = False, run_offset: int = 0,
               radius: float | None = None) -> OrbitBatch:
    """Simulate M runs and collect exceedance atoms.

    For ``d > 1`` the window is the Euclidean ball whose normalised radius is
    ``radius`` (default: the ball of mark ``tau_max``) and marks are
    ``n * mu(ball of that radius)``.
    """
    if n < 1 or M < 1:
        raise DomainError("n and M must be positive")
    ts = ThresholdScheme(obs, n)
    N = int(round(n * horizon))
    L = int(lookahead)
    total = N + L
    d = spec.dimension
    if spec.kind == DIGIT_SHIFT:
        return _run_digit(spec, obs, ts, n, M, seed, tau_max, N, L, total, records, run_offset, radius)
    if d != 1:
        raise UnsupportedOperation("float ensembles are one-dimensional")
    return _run_float(spec, obs, ts, n, M, seed, tau_max, N, L, total, records, run_offset)


def _run_digit(spec, obs, ts, n, M, seed, tau_max, N, L, total, records, run_offset, radius):
    d = spec.dimension
    bases = spec.bases
    two = obs.kind == "two_site"
    if two:
        if d != 1:
            raise DomainError("the two-site observable lives on the circle")
        sites = [obs.zeta[0], obs.zeta[1]]
        r_max = [tau_max / (22 * n), 10 * tau_max / (22 * n)]
    elif d == 1:
        sites = [obs.zeta[0]]
        r_max = [float(ts.distance_of_mark(tau_max))]
    else:
        sites = list(obs.zeta)
        if radius is None:
            r = float(ts.distance_of_mark(tau_max))
        else:
            r = radius * multi_scale(ts)
        r_max = [r] * d
    zints = [digits_floor(z, bases[0] if two else bases[i], digits_per_word(bases[0] if two else bases[i]))
             for i, z in enumerate(sites)]
    out_r, out_j, out_m, out_o = [], [], [], []
    rec_r, rec_j, rec_m = [], [], []
    unresolved = 0
    for run in range(M):
        g = run_offset + run
        streams = [DigitStream(b, seed_sequence(seed, g, i)) for i, b in enumerate(bases)]
        words = [st.words(-(-total // st.D) + 4) for st in streams]
        if d == 1:
            b = bases[0]
            Wm = window_matrix(words[0], b)
            j = near_positions(Wm, zints[0], _radius_int(r_max[0], b), b, total)
            if two:
                j = np.union1d(j, near_positions(Wm, zints[1], _radius_int(r_max[1], b), b, total))
            W = Wm[j % Wm.shape[0], j // Wm.shape[0]]
            dist, pos = circle_dist_ints(W, zints[0], b)
            o1 = _signed(dist, pos, b)
            unresolved += _fix_unresolved(words[0], b, sites[0], j, dist, o1)
            if two:
                dist2, pos2 = circle_dist_ints(W, zints[1], b)
                o2 = _signed(dist2, pos2, b)
                unresolved += _fix_unresolved(words[0], b, sites[1], j, dist2, o2)
                mk = ts.two_site_mark(np.abs(o1), np.abs(o2))
                off = np.stack([o1, o2], axis=1)
            else:
                mk = ts.marks_of_distances(np.abs(o1))
                off = o1.reshape(-1, 1)
            if records:
                weights = (100, 10) if two else (1,)
                rj, full = _records(Wm, zints, weights, N, b)
                if two:
                    rmk = ts.two_site_mark(full[0] * _scale(b), full[1] * _scale(b))
                else:
                    rmk = ts.marks_of_distances(full[0] * _scale(b))
                rec_r.append(np.full(len(rj), run, np.int64))
                rec_j.append(rj)
                rec_m.append(rmk)
        else:
            b0 = bases[0]
            Wm = window_matrix(words[0], b0)
            j = near_positions(Wm, zints[0], _radius_int(r_max[0], b0), b0, total)
            dist0, pos0 = circle_dist_ints(Wm[j % Wm.shape[0], j // Wm.shape[0]], zints[0], b0)
            offs = [_signed(dist0, pos0, b0)]
            unresolved += _fix_unresolved(words[0], b0, sites[0], j, dist0, offs[0])
            for i in range(1, d):
                bi = bases[i]
                Wi = windows_at(words[i], bi, j)
                di, pi = circle_dist_ints(Wi, zints[i], bi)
                offs.append(_signed(di, pi, bi))
                unresolved += _fix_unresolved(words[i], bi, sites[i], j, di, offs[-1])
            off = np.stack(offs, axis=1)
            rr = np.linalg.norm(off, axis=1)
            keep = rr <= r_max[0]
            j, off, rr = j[keep], off[keep], rr[keep]
            mk = ts.marks_of_distances(rr)
            if records:
                raise UnsupportedOperation("record tracking is implemented for circle maps")
        keep = mk <= tau_max if d == 1 else np.ones(len(j), bool)
        out_r.append(np.full(int(keep.sum()), run, np.int64))
        out_j.append(j[keep].astype(np.int64))
        out_m.append(mk[keep])
        out_o.append(off[keep])
    return _assemble(n, N, M, tau_max, L, out_r, out_j, out_m, out_o, rec_r, rec_j, rec_m, records, unresolved,
                     {"engine": "digit_stream"})


def _run_float(spec, obs, ts, n, M, seed, tau_max, N, L, total, records, run_offset):
    z = float(as_real(obs.zeta[0])) if obs.kind != "two_site" else None
    out_r, out_j, out_m, out_o = [], [], [], []
    rec_r, rec_j, rec_m = [], [], []
    for run in range(M):
        g = run_offset + run
        rng = np.random.Generator(np.random.PCG64(seed_sequence(seed, g, 0)))
        x0 = rng.random()
        xs = np.concatenate([[x0], iterate_float(spec, x0, total - 1, dither=True, seed=seed_sequence(seed, g, 1))])
        if obs.kind == "two_site":
            z1, z2 = float(as_real(obs.zeta[0])), float(as_real(obs.zeta[1]))
            d1 = np.abs(np.mod(xs - z1 + 0.5, 1.0) - 0.5)
            d2 = np.abs(np.mod(xs - z2 + 0.5, 1.0) - 0.5)
            mk = ts.two_site_mark(d1, d2)
            off_all = np.mod(xs - z1 + 0.5, 1.0) - 0.5
        else:
            off_all = np.mod(xs - z + 0.5, 1.0) - 0.5
            mk = ts.marks_of_distances(np.abs(off_all))
        j = np.flatnonzero(mk <= tau_max)
        out_r.append(np.full(len(j), run, np.int64))
        out_j.append(j)
        out_m.append(mk[j])
        out_o.append(off_all[j].reshape(-1, 1))
        if records:
            key = mk[:N]
            prev = np.minimum.accumulate(key)
            isrec = np.concatenate([[True], key[1:] < prev[:-1]])
            rj = np.flatnonzero(isrec)
            rec_r.append(np.full(len(rj), run, np.int64))
            rec_j.append(rj)
            rec_m.append(key[rj])
    return _assemble(n, N, M, tau_max, L, out_r, out_j, out_m, out_o, rec_r, rec_j, rec_m, records, 0,
                     {"engine": "float_dithered"})


def _cat(parts, dtype=float, width=None):
    if parts:
        return np.concatenate(parts)
    return np.empty((0, width) if width else 0, dtype=dtype)


def _assemble(n, N, M, tau_max, L, r, j, m, o, rr, rj, rm, records, unresolved, meta):
    width = o[0].shape[1] if o else 1
    batch = OrbitBatch(n, N, M, float(tau_max), L, _cat(r, np.int64), _cat(j, np.int64), _cat(m),
                       _cat(o, width=width), unresolved=unresolved, meta=meta)
    if records:
        batch.rec_run = _cat(rr, np.int64)
        batch.rec_idx = _cat(rj, np.int64)
        batch.rec_mark = _cat(rm)
    if unresolved:
        batch.meta["unresolved_steps"] = int(unresolved)
    return batch


def check_resolution(batch: OrbitBatch, limit: int = 0):
    if batch.unresolved > limit:
        raise ResolutionError(f"{batch.unresolved} steps could not be resolved; raise the digit resolution")
