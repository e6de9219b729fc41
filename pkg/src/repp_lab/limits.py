"""Exact samplers for the limiting point processes and their analytic oracles.

Every sampler builds the process literally: mark bands ``(i-1, i]`` (or
annuli ``B_i \\ B_{i-1}``) each carry independent exponential inter-arrival
times, base marks are uniform within the band, and clustering laws attach a
finite stack of further atoms at the same time. Ensembles of M samples are
drawn together from one generator seeded by ``(seed, law-tag)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .empirical import Cell, PointEnsemble, PointMeasure, RectangleFamily
from .errors import DomainError, UnsupportedOperation
from .nu import OuterMeasureSpec, nu_eval
from .systems import parse_scalar, seed_sequence

VARIANTS = (
    "poisson2d",
    "compound1d",
    "stacked_geometric",
    "poisson_multid",
    "stacked_linear",
    "ndag",
    "hat_n",
    "double_hat_n",
)

DOUBLE_HAT_THETA = Fraction(23, 33)
DOUBLE_HAT_PZ1 = Fraction(3, 23)
DOUBLE_HAT_RATIO = Fraction(3, 10)


@dataclass(frozen=True)
class Window:
    horizon: float = 1.0
    tau_max: float = 10.0
    radius: float = 3.0

    def __post_init__(self):
        if self.horizon < 0 or self.tau_max < 0 or self.radius < 0:
            raise DomainError("window extents must be nonnegative")


def _frac(v):
    if v is None:
        return None
    if isinstance(v, float):
        return v
    return Fraction(v) if not isinstance(v, Fraction) else v


@dataclass(frozen=True)
class LimitLaw:
    variant: str
    theta: Fraction | float | None = None
    alpha: Fraction | float | None = None
    d: int = 1
    matrix: tuple | None = None
    p: int = 1
    beta_plus: Fraction | float | None = None
    tau: Fraction | float | None = None

    def __post_init__(self):
        v = self.variant
        if v not in VARIANTS:
            raise DomainError(f"unknown limit law {v!r}")
        for name in ("theta", "alpha", "beta_plus", "tau"):
            object.__setattr__(self, name, _frac(getattr(self, name)))
        if self.matrix is not None:
            object.__setattr__(self, "matrix", tuple(tuple(_frac(x) for x in r) for r in self.matrix))
        if v == "compound1d":
            if not (0 < self.theta <= 1) or self.tau is None or self.tau <= 0:
                raise DomainError("compound Poisson needs theta in (0, 1] and tau > 0")
        elif v == "stacked_geometric":
            if self.alpha is None or self.alpha <= 1 or self.d < 1:
                raise DomainError("stacked law needs alpha > 1 and d >= 1")
            expect = 1 - self.alpha ** (-self.d)
            if self.theta is None:
                object.__setattr__(self, "theta", expect)
            elif abs(float(self.theta) - float(expect)) > 1e-12:
                raise DomainError(f"theta must equal 1 - alpha^-d = {float(expect)}")
        elif v in ("stacked_linear", "ndag"):
            if self.matrix is None:
                raise DomainError("matrix required")
            M = np.array(self.matrix, dtype=float)
            det = abs(np.linalg.det(M))
            if not det > 1:
                raise DomainError("matrix must be invertible with |det| > 1")
            if v == "ndag" and M.shape != (2, 2):
                raise DomainError("the angular stacked law is two-dimensional")
            object.__setattr__(self, "d", M.shape[0])
            expect = 1 - 1 / det
            if self.theta is None:
                det_exact = _det_exact(self.matrix)
                object.__setattr__(self, "theta", 1 - 1 / abs(det_exact) if det_exact is not None else expect)
            elif abs(float(self.theta) - expect) > 1e-12:
                raise DomainError(f"theta must equal 1 - 1/|det| = {expect}")
        elif v == "hat_n":
            if self.beta_plus is None or self.beta_plus <= 1:
                raise DomainError("beta_plus must exceed 1")
            object.__setattr__(self, "theta", 1 - 1 / (2 * self.beta_plus))
        elif v == "double_hat_n":
            object.__setattr__(self, "theta", Fraction(10, 11))
        elif v in ("poisson2d", "poisson_multid"):
            object.__setattr__(self, "theta", Fraction(1))

    # constructors -----------------------------------------------------------
    @classmethod
    def poisson2d(cls):
        return cls("poisson2d")

    @classmethod
    def compound1d(cls, theta, tau):
        return cls("compound1d", theta=theta, tau=tau)

    @classmethod
    def stacked_geometric(cls, alpha, d=1, theta=None):
        return cls("stacked_geometric", alpha=alpha, d=d, theta=theta)

    @classmethod
    def poisson_multid(cls, d=2):
        return cls("poisson_multid", d=d)

    @classmethod
    def stacked_linear(cls, matrix, theta=None):
        return cls("stacked_linear", matrix=matrix, theta=theta)

    @classmethod
    def ndag(cls, matrix, p=1):
        return cls("ndag", matrix=matrix, p=p)

    @classmethod
    def hat_n(cls, beta_plus):
        return cls("hat_n", beta_plus=beta_plus)

    @classmethod
    def double_hat_n(cls):
        return cls("double_hat_n")

    @property
    def mark_dim(self):
        if self.variant in ("poisson_multid", "stacked_linear"):
            return self.d
        return 1

    @property
    def base_rate(self):
        """Intensity of stack bases per unit time and unit mark."""
        if self.variant == "double_hat_n":
            return DOUBLE_HAT_THETA
        return self.theta

    def outer_measure(self) -> OuterMeasureSpec:
        v = self.variant
        if v in ("poisson2d", "poisson_multid"):
            return OuterMeasureSpec.lebesgue()
        if v == "stacked_geometric":
            return OuterMeasureSpec.contraction(self.alpha ** (-self.d))
        if v == "stacked_linear":
            return OuterMeasureSpec.linear(_inverse(self.matrix))
        if v == "ndag":
            return OuterMeasureSpec.angular(self.matrix)
        if v == "hat_n":
            return OuterMeasureSpec.mixture(Fraction(1, 2), Fraction(1, 2), 1 / self.beta_plus)
        if v == "double_hat_n":
            return OuterMeasureSpec.mixture(Fraction(10, 11), Fraction(1, 11), Fraction(10, 3))
        raise UnsupportedOperation("the compound Poisson law has no mark space")

    def to_dict(self):
        def enc(x):
            return str(x) if isinstance(x, Fraction) else x

        d = {"variant": self.variant, "theta": enc(self.theta)}
        for name in ("alpha", "beta_plus", "tau"):
            if getattr(self, name) is not None:
                d[name] = enc(getattr(self, name))
        if self.variant in ("stacked_geometric", "poisson_multid"):
            d["d"] = self.d
        if self.matrix is not None:
            d["matrix"] = [[enc(x) for x in r] for r in self.matrix]
            d["p"] = self.p
        return d

    @classmethod
    def from_dict(cls, d):
        kw = {}
        for name in ("alpha", "beta_plus", "tau", "theta"):
            if d.get(name) is not None:
                kw[name] = parse_scalar(d[name])
        if "d" in d:
            kw["d"] = int(d["d"])
        if "matrix" in d:
            kw["matrix"] = [[parse_scalar(x) for x in r] for r in d["matrix"]]
            kw["p"] = int(d.get("p", 1))
        v = d["variant"]
        if v in ("hat_n", "double_hat_n", "poisson2d", "poisson_multid"):
            kw.pop("theta", None)
        return cls(v, **kw)

    @classmethod
    def parse(cls, text: str) -> "LimitLaw":
        """``"stacked_geometric:alpha=3/2,d=1"``, ``"ndag:matrix=2;0|0;3"`` ..."""
        name, _, rest = text.partition(":")
        d = {"variant": name.strip()}
        for part in rest.split(","):
            if not part.strip():
                continue
            k, _, v = part.partition("=")
            k, v = k.strip(), v.strip()
            if k == "matrix":
                d["matrix"] = [[x for x in row.split(";")] for row in v.split("|")]
            else:
                d[k] = v
        return cls.from_dict(d)


def _det_exact(m):
    if not all(isinstance(x, Fraction) for r in m for x in r):
        return None
    if len(m) == 1:
        return m[0][0]
    if len(m) == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    return None


def _inverse(m):
    if len(m) <= 2 and all(isinstance(x, Fraction) for r in m for x in r):
        if len(m) == 1:
            return ((1 / m[0][0],),)
        a, b = m[0]
        c, d = m[1]
        det = a * d - b * c
        return ((d / det, -b / det), (-c / det, a / det))
    return tuple(tuple(r) for r in np.linalg.inv(np.array(m, dtype=float)).tolist())


# ---------------------------------------------------------------------------
# sampling primitives


def exponential(rng, size):
    """Exp(1) by inverse CDF from 53-bit uniforms."""
    return -np.log1p(-rng.random(size))


def arrivals(rng, rates, horizon):
    """Poisson arrival times on ``[0, horizon)`` for independent rows.

    Returns ``(row, t)`` sorted by row then time.
    """
    rates = np.asarray(rates, dtype=float)
    cur = np.zeros(len(rates))
    active = np.flatnonzero(rates > 0)
    rows, times = [], []
    while active.size:
        cur[active] += exponential(rng, active.size) / rates[active]
        ok = cur[active] < horizon
        active = active[ok]
        rows.append(active)
        times.append(cur[active].copy())
    if not rows:
        return np.empty(0, dtype=np.int64), np.empty(0)
    r = np.concatenate(rows)
    t = np.concatenate(times)
    order = np.lexsort((t, r))
    return r[order], t[order]


def _bands(top):
    top = float(top)
    nb = max(int(math.ceil(top)), 0)
    lo = np.arange(nb, dtype=float)
    hi = np.minimum(lo + 1, top)
    return lo, hi


def _base_points(rng, M, rate, top, horizon):
    """Stack bases: per band (i-1, i] of (0, top], Exp(rate*width) gaps, uniform marks."""
    lo, hi = _bands(top)
    nb = len(lo)
    if nb == 0 or M == 0:
        return np.empty(0, np.int64), np.empty(0), np.empty(0)
    w = hi - lo
    rates = np.tile(float(rate) * w, M)
    row, t = arrivals(rng, rates, horizon)
    b = row % nb
    u = hi[b] - rng.random(len(row)) * w[b]
    return row // nb, t, u


def _annulus_points(rng, M, rate, d, radius, horizon):
    """Uniform points in annuli ``B_i \\ B_{i-1}`` of the radius-R ball."""
    lo, hi = _bands(radius)
    nb = len(lo)
    if nb == 0 or M == 0:
        return np.empty(0, np.int64), np.empty(0), np.empty((0, d))
    vd = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    leb = vd * (hi**d - lo**d)
    row, t = arrivals(rng, np.tile(float(rate) * leb, M), horizon)
    b = row % nb
    rad = (lo[b] ** d + rng.random(len(row)) * (hi[b] ** d - lo[b] ** d)) ** (1.0 / d)
    g = rng.standard_normal((len(row), d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return row // nb, t, g * rad[:, None]


def _pack(sample, t, marks, M, horizon, weights=None) -> PointEnsemble:
    marks = np.asarray(marks, dtype=float)
    marks = marks.reshape(len(t), 1) if marks.ndim == 1 else marks.reshape(len(t), marks.shape[-1])
    order = np.lexsort((marks[:, 0], t, sample)) if len(t) else np.empty(0, np.int64)
    w = None if weights is None else np.asarray(weights)[order]
    return PointEnsemble(np.asarray(sample, np.int64)[order], np.asarray(t)[order], marks[order], M, horizon, w)


def _stack_scalar(sample, t, u, factor_fn, cap):
    """Expand bases into stacks ``u * factor_fn(l)`` for l >= 1 while <= cap."""
    S, T, U = [sample], [t], [u]
    alive = np.ones(len(u), dtype=bool)
    ell = 1
    while alive.any():
        f = factor_fn(ell, alive)
        m = np.where(alive, u * f, np.inf)
        alive &= m <= cap
        S.append(sample[alive])
        T.append(t[alive])
        U.append(m[alive])
        ell += 1
    return np.concatenate(S), np.concatenate(T), np.concatenate(U)


# ---------------------------------------------------------------------------
# samplers


_TAGS = {v: i for i, v in enumerate(VARIANTS)}


def sample_ensemble(law: LimitLaw, window: Window, M: int, seed) -> PointEnsemble:
    """M independent samples of the law on the window, deterministic in the seed."""
    rng = np.random.Generator(np.random.PCG64(seed_sequence(seed, 7_000 + _TAGS[law.variant])))
    H, cap = window.horizon, window.tau_max
    v = law.variant
    if v == "poisson2d":
        s, t, u = _base_points(rng, M, 1, cap, H)
        return _pack(s, t, u, M, H)
    if v == "compound1d":
        row, t = arrivals(rng, np.full(M, float(law.theta * law.tau)), H)
        mult = rng.geometric(float(law.theta), size=len(t))
        return _pack(row, t, mult.astype(float), M, H, weights=mult)
    if v == "stacked_geometric":
        s, t, u = _base_points(rng, M, law.theta, cap, H)
        f = float(law.alpha ** law.d)
        return _pack(*_stack_scalar(s, t, u, lambda ell, _: f**ell, cap), M, H)
    if v == "ndag":
        s, t, u = _base_points(rng, M, law.theta, cap, H)
        ang = rng.uniform(0.0, 2 * math.pi, len(u))
        A = np.array(law.matrix, dtype=float)
        vec = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        state = {"v": vec}

        def fac(ell, alive):
            state["v"] = state["v"] @ A.T
            return np.einsum("ij,ij->i", state["v"], state["v"])

        return _pack(*_stack_scalar(s, t, u, fac, cap), M, H)
    if v == "hat_n":
        s, t, u = _base_points(rng, M, law.theta, cap, H)
        beta = float(law.beta_plus)
        keep = (rng.random(len(u)) < 1 / (2 * float(law.theta))) & (beta * u <= cap)
        return _pack(np.concatenate([s, s[keep]]), np.concatenate([t, t[keep]]),
                     np.concatenate([u, beta * u[keep]]), M, H)
    if v == "double_hat_n":
        # bases up to cap/ratio so that companions landing in the window are kept
        s, t, u = _base_points(rng, M, DOUBLE_HAT_THETA, cap / float(DOUBLE_HAT_RATIO), H)
        comp = rng.random(len(u)) < float(DOUBLE_HAT_PZ1)
        cu = float(DOUBLE_HAT_RATIO) * u
        kb = u <= cap
        kc = comp & (cu <= cap)
        return _pack(np.concatenate([s[kb], s[kc]]), np.concatenate([t[kb], t[kc]]),
                     np.concatenate([u[kb], cu[kc]]), M, H)
    if v in ("poisson_multid", "stacked_linear"):
        d = law.d
        rate = 1 if v == "poisson_multid" else float(law.theta)
        s, t, x = _annulus_points(rng, M, rate, d, window.radius, H)
        if v == "poisson_multid":
            return _pack(s, t, x, M, H)
        A = np.array(law.matrix, dtype=float)
        S, T, X = [s], [t], [x]
        cur = x
        alive = np.ones(len(s), dtype=bool)
        while alive.any():
            cur = cur @ A.T
            alive &= np.linalg.norm(cur, axis=1) <= window.radius
            S.append(s[alive])
            T.append(t[alive])
            X.append(cur[alive])
        return _pack(np.concatenate(S), np.concatenate(T), np.concatenate(X), M, H)
    raise UnsupportedOperation(v)


def _single(law, window, seed) -> PointMeasure:
    ens = sample_ensemble(law, window, 1, seed)
    sel = ens.run_id == 0
    return PointMeasure(ens.times[sel], ens.marks[sel], window.horizon)


def sample_poisson2d(window: Window, seed) -> PointMeasure:
    return _single(LimitLaw.poisson2d(), window, seed)


def sample_stacked_geometric(law: LimitLaw, window: Window, seed) -> PointMeasure:
    if law.variant != "stacked_geometric":
        raise DomainError("expected a stacked geometric law")
    return _single(law, window, seed)


def sample_compound1d(theta, tau, window: Window, seed) -> PointMeasure:
    """Event times with Exp(theta*tau) gaps; the mark is the Geometric(theta) multiplicity."""
    return _single(LimitLaw.compound1d(theta, tau), window, seed)


def sample_multid(law: LimitLaw, window: Window, seed) -> PointMeasure:
    if law.variant not in ("poisson_multid", "stacked_linear"):
        raise DomainError("expected a multi-dimensional law")
    return _single(law, window, seed)


def sample_ndag(law: LimitLaw, window: Window, seed) -> PointMeasure:
    if law.variant != "ndag":
        raise DomainError("expected the angular stacked law")
    return _single(law, window, seed)


def sample_hat_n(beta_plus, window: Window, seed) -> PointMeasure:
    return _single(LimitLaw.hat_n(beta_plus), window, seed)


def sample_double_hat_n(window: Window, seed) -> PointMeasure:
    return _single(LimitLaw.double_hat_n(), window, seed)


# ---------------------------------------------------------------------------
# analytic oracles


def _cell_nu(spec_or_law, cell: Cell):
    if isinstance(spec_or_law, LimitLaw) and spec_or_law.variant == "compound1d":
        if cell.marks is not None:
            raise UnsupportedOperation("compound Poisson cells are time intervals")
        return float(spec_or_law.theta * spec_or_law.tau)
    spec = spec_or_law.outer_measure() if isinstance(spec_or_law, LimitLaw) else spec_or_law
    if cell.marks is None:
        raise UnsupportedOperation("cell has no mark set for this law")
    return float(nu_eval(spec, cell.marks))


def analytic_void(law_or_spec, fam: RectangleFamily) -> float:
    """``prod_k exp(-nu(A_k) |J_k|)``."""
    expo = sum(_cell_nu(law_or_spec, c) * (c.b - c.a) for c in fam.cells)
    return math.exp(-expo)


def expected_count(law: LimitLaw, cell: Cell) -> float:
    """Mean count on a cell: Lebesgue measure of ``J x A`` (``tau |J|`` for the compound law)."""
    if law.variant == "compound1d":
        return float(law.tau) * cell.duration
    return float(cell.leb())
