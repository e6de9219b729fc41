"""Observables ``phi = g(dist(x, zeta))`` and the threshold calibration u_n."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DomainError, StateError, UnsupportedOperation
from .intervals import IntervalUnion
from .systems import (
    DIGIT_SHIFT,
    DigitStream,
    PiMultiple,
    SystemSpec,
    as_real,
    circle_dist_ints,
    digits_floor,
    digits_per_word,
    iterate_float,
    parse_point,
    parse_scalar,
    scalar_str,
    seed_sequence,
    windows,
)

G_KINDS = ("g1", "g2", "g3", "two_site")
TWO_SITE_ZETA = (PiMultiple(Fraction(1, 16)), PiMultiple(Fraction(3, 16)))
TWO_SITE_WEIGHTS = (100, 10)


def _exact(x):
    return isinstance(x, (Fraction, int))


def _pow(x, e):
    """``x**e`` kept rational when both are rational and e is an integer."""
    if _exact(x) and _exact(e) and Fraction(e).denominator == 1:
        return Fraction(x) ** int(e)
    return float(x) ** float(e)


@dataclass(frozen=True)
class ObservableSpec:
    """``phi(x) = g(dist(x, zeta))`` or the two-site tent pair.

    g1: ``-log y``; g2: ``y**(-1/a)``; g3: ``c - y**(1/a)``.
    """

    kind: str
    zeta: tuple = (Fraction(0),)
    a: Fraction | float = Fraction(1)
    c: Fraction | float = Fraction(1)

    def __post_init__(self):
        if self.kind not in G_KINDS:
            raise DomainError(f"unknown observable kind {self.kind!r}")
        object.__setattr__(self, "zeta", parse_point(self.zeta))
        object.__setattr__(self, "a", parse_scalar(self.a))
        object.__setattr__(self, "c", parse_scalar(self.c))
        if self.kind == "two_site":
            object.__setattr__(self, "zeta", TWO_SITE_ZETA)
        if self.a <= 0:
            raise DomainError("parameter a must be positive")

    @classmethod
    def two_site(cls):
        return cls("two_site")

    @property
    def dimension(self):
        return 1 if self.kind == "two_site" else len(self.zeta)

    def g(self, y):
        if self.kind == "g1":
            return math.inf if y == 0 else -math.log(y)
        if self.kind == "g2":
            if y == 0:
                return math.inf
            if self.a == 1 and _exact(y):
                return 1 / Fraction(y)
            return float(y) ** (-1.0 / float(self.a))
        if self.kind == "g3":
            if self.a == 1 and _exact(y):
                return self.c - Fraction(y)
            return float(self.c) - float(y) ** (1.0 / float(self.a))
        raise UnsupportedOperation("two-site observable is not of the form g(dist)")

    def g_inverse(self, u):
        """Radius ``g^{-1}(u)``; 0 when u is above the range of g."""
        if self.kind == "g1":
            return math.exp(-float(u))
        if self.kind == "g2":
            if u <= 0:
                return math.inf
            return _pow(u, -self.a) if self.a == int(self.a) else float(u) ** (-float(self.a))
        if self.kind == "g3":
            if u >= self.c:
                return 0
            return _pow(self.c - u, self.a) if _exact(u) else (float(self.c) - float(u)) ** float(self.a)
        raise UnsupportedOperation("two-site observable is not of the form g(dist)")

    @property
    def sup(self):
        if self.kind == "g3":
            return self.c
        if self.kind == "two_site":
            return 1
        return math.inf

    def to_text(self) -> str:
        lines = [f"g={self.kind}"]
        if self.kind != "two_site":
            lines.append("zeta=" + ",".join(scalar_str(z) for z in self.zeta))
            lines.append(f"a={scalar_str(self.a)}")
            if self.kind == "g3":
                lines.append(f"c={scalar_str(self.c)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, kv: dict) -> "ObservableSpec":
        kv = dict(kv)
        kind = kv.pop("g", None) or kv.pop("kind", None)
        if kind is None:
            raise DomainError("observable block lacks 'g'")
        kw = {}
        for key in ("zeta", "a", "c"):
            if key in kv:
                kw[key] = kv.pop(key)
        if kv:
            raise DomainError(f"unknown observable keys: {', '.join(sorted(kv))}")
        return cls(kind, **kw)


def _coord_dists(x, zeta):
    x = parse_point(x) if not isinstance(x, (tuple, list)) else tuple(x)
    out = []
    for xi, zi in zip(x, zeta):
        xi = as_real(xi)
        zi = as_real(zi)
        if isinstance(xi, float) or isinstance(zi, float):
            xi, zi = float(xi), float(zi)
        d = (xi - zi) % 1
        out.append(min(d, 1 - d))
    return out


def distance(x, zeta):
    ds = _coord_dists(x, zeta)
    if len(ds) == 1:
        return ds[0]
    return math.sqrt(sum(float(d) ** 2 for d in ds))


def evaluate(obs: ObservableSpec, x):
    """phi(x)."""
    if obs.kind == "two_site":
        d1 = float(distance(x, (obs.zeta[0],)))
        d2 = float(distance(x, (obs.zeta[1],)))
        return max(0.0, 1 - 100 * d1) + max(0.0, 1 - 10 * d2)
    return obs.g(distance(x, obs.zeta))


def exceedance_set(obs: ObservableSpec, u) -> IntervalUnion:
    """``{phi > u}`` as a union of circle balls (one-dimensional observables)."""
    if obs.dimension != 1:
        raise UnsupportedOperation("exceedance sets are interval unions only in dimension 1")
    if u >= obs.sup:
        return IntervalUnion.empty()
    if obs.kind == "two_site":
        r = 1 - u
        z1, z2 = (float(z) for z in obs.zeta)
        return IntervalUnion.ball(z1, r / 100).union(IntervalUnion.ball(z2, r / 10))
    z = as_real(obs.zeta[0])
    return IntervalUnion.ball(z, obs.g_inverse(u))


# ---------------------------------------------------------------------------
# measure models and thresholds


def unit_ball_volume(d: int):
    if d == 1:
        return Fraction(2)
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


@dataclass(frozen=True)
class AnalyticDensity:
    """``mu(B_r(zeta)) = density * V_d * r**d`` (exact for Lebesgue on the circle)."""

    density: Fraction | float = Fraction(1)
    dim: int = 1

    def ball(self, r):
        v = unit_ball_volume(self.dim)
        if _exact(r) and _exact(self.density) and _exact(v):
            return self.density * v * Fraction(r) ** self.dim
        return float(self.density) * float(v) * float(r) ** self.dim

    def radius(self, m):
        v = unit_ball_volume(self.dim)
        if self.dim == 1 and _exact(m) and _exact(self.density):
            return Fraction(m) / (self.density * v)
        return (float(m) / (float(self.density) * float(v))) ** (1.0 / self.dim)


@dataclass(frozen=True)
class MeasureTable:
    """Empirical ball measures ``r -> mu(B_r(zeta))`` from a calibration orbit."""

    radii: tuple
    mu: tuple
    se: tuple
    m: int

    def ball(self, r):
        return float(np.interp(float(r), self.radii, self.mu))

    def radius(self, m):
        return float(np.interp(float(m), self.mu, self.radii))

    def to_dict(self):
        return {"radii": list(self.radii), "mu": list(self.mu), "se": list(self.se), "m": self.m}


@dataclass(frozen=True)
class ThresholdScheme:
    """Level function ``u_n(tau)`` and inverse for one (observable, n, model)."""

    obs: ObservableSpec
    n: int
    model: AnalyticDensity | MeasureTable | None = field(default_factory=AnalyticDensity)

    def __post_init__(self):
        m = self.model
        if isinstance(m, AnalyticDensity) and self.obs.kind != "two_site" and m.dim != self.obs.dimension:
            object.__setattr__(self, "model", AnalyticDensity(m.density, self.obs.dimension))

    def _model(self):
        if self.model is None:
            raise StateError("empirical measure model has no calibration table")
        return self.model

    def mark_of_distance(self, r):
        """``n * mu(B_r(zeta))``: the 2-D REPP mark of an orbit point at distance r."""
        if self.obs.kind == "two_site":
            raise UnsupportedOperation("two-site marks depend on both site distances")
        return self.n * self._model().ball(r)

    def marks_of_distances(self, r: np.ndarray) -> np.ndarray:
        m = self._model()
        if isinstance(m, AnalyticDensity):
            return self.n * float(m.density) * float(unit_ball_volume(m.dim)) * np.asarray(r, float) ** m.dim
        return self.n * np.interp(np.asarray(r, float), m.radii, m.mu)

    def distance_of_mark(self, tau):
        return self._model().radius(Fraction(tau) / self.n if _exact(tau) else float(tau) / self.n)

    def two_site_mark(self, d1, d2):
        """``u_n^{-1}(phi)`` expressed through the two site distances."""
        scale = Fraction(22, 100) * self.n
        return float(scale) * np.minimum(np.minimum(100 * np.asarray(d1, float), 10 * np.asarray(d2, float)), 1.0)

    def threshold(self, tau):
        if tau <= 0:
            raise DomainError("tau must be positive")
        if self.obs.kind == "two_site":
            t = Fraction(tau) if _exact(tau) else float(tau)
            return 1 - Fraction(100, 11) * t / (2 * self.n) if _exact(t) else 1 - (100 / 11) * t / (2 * self.n)
        return self.obs.g(self.distance_of_mark(tau))

    def tau_of(self, z):
        if self.obs.kind == "two_site":
            if _exact(z):
                return 2 * self.n * Fraction(11, 100) * (1 - Fraction(z))
            return 2 * self.n * 0.11 * (1 - float(z))
        return self.mark_of_distance(self.obs.g_inverse(z))


def calibrate_birkhoff(spec: SystemSpec, obs: ObservableSpec, m: int, seed, radii=None) -> MeasureTable:
    """Ball-measure table from visit frequencies of one long orbit."""
    if m < 10**5:
        raise DomainError("calibration orbit needs at least 1e5 points")
    if obs.dimension != 1:
        raise UnsupportedOperation("calibration implemented for one-dimensional observables")
    z = obs.zeta[0]
    if spec.kind == DIGIT_SHIFT:
        b = spec.bases[0]
        D = digits_per_word(b)
        st = DigitStream(b, seed_sequence(seed, 0, 0))
        W = windows(st.words(m // D + 2), b)[:m]
        dist, _ = circle_dist_ints(W, digits_floor(z, b, D), b)
        d = dist.astype(float) / float(b**D)
    else:
        rng = np.random.default_rng(seed_sequence(seed))
        x0 = rng.random()
        xs = iterate_float(spec, x0, m, dither=True, seed=seed_sequence(seed, 1))
        zf = float(as_real(z))
        dd = np.mod(xs - zf, 1.0)
        d = np.minimum(dd, 1 - dd)
    if radii is None:
        radii = np.geomspace(1e-4, 0.5, 64)
    radii = np.sort(np.asarray(radii, float))
    d.sort()
    counts = np.searchsorted(d, radii, side="left")
    mu = counts / m
    se = np.sqrt(mu * (1 - mu) / m)
    if np.any(counts == 0):
        warnings.warn(
            f"zero visits at radius {radii[counts == 0][-1]:.3g}; widen the radius or lengthen the orbit",
            RuntimeWarning,
            stacklevel=2,
        )
    return MeasureTable(tuple(radii.tolist()), tuple(mu.tolist()), tuple(se.tolist()), int(m))
