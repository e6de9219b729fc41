"""The clustering outer measure nu on interval and box unions.

Variants:

* ``lebesgue``: nu(A) = |A|.
* ``contraction``: nu(A) = |A \\ U_{j>=1} lam^j A|.
* ``linear``: nu(A) = |A \\ U_{j>=1} M^j A| for a contracting matrix M.
* ``mixture``: nu(A) = w1 |A| + w2 |A \\ c A|.
* ``angular``: the stacked process whose stack marks are
  ``u * |M^l e_Theta|^2`` with a uniform angle; nu has no closed form and is
  integrated over the angle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .errors import DomainError, UnsupportedOperation
from .intervals import BoxUnion, IntervalUnion, union_all, union_measure_minus
from .systems import parse_scalar

TAIL = 1e-15
VARIANTS = ("lebesgue", "contraction", "linear", "mixture", "angular")


def _matrix(m):
    arr = np.array(m, dtype=object)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    return tuple(tuple(r) for r in arr.tolist())


@dataclass(frozen=True)
class OuterMeasureSpec:
    variant: str
    lam: Fraction | float | None = None
    matrix: tuple | None = None
    w1: Fraction | float = 1
    w2: Fraction | float = 0
    c: Fraction | float | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DomainError(f"unknown outer-measure variant {self.variant!r}")
        if self.variant == "contraction" and not (0 < self.lam < 1):
            raise DomainError("contraction factor must lie in (0, 1)")
        if self.variant in ("linear", "angular"):
            if self.matrix is None:
                raise DomainError("matrix required")
            object.__setattr__(self, "matrix", _matrix(self.matrix))
            det = abs(float(np.linalg.det(np.array(self.matrix, dtype=float))))
            if self.variant == "linear" and not det < 1:
                raise DomainError("linear family needs |det M| < 1")
            if self.variant == "angular" and not det > 1:
                raise DomainError("angular stacks need an expanding matrix")
        if self.variant == "mixture":
            if self.c is None or self.c <= 0 or self.w1 < 0 or self.w2 < 0:
                raise DomainError("mixture needs positive weights and scale")

    @classmethod
    def lebesgue(cls):
        return cls("lebesgue")

    @classmethod
    def contraction(cls, lam):
        return cls("contraction", lam=lam)

    @classmethod
    def linear(cls, matrix):
        return cls("linear", matrix=matrix)

    @classmethod
    def mixture(cls, w1, w2, c):
        return cls("mixture", w1=w1, w2=w2, c=c)

    @classmethod
    def angular(cls, matrix):
        """Stacks ``u |M^l e|^2`` with base rate ``1 - 1/|det M|``."""
        return cls("angular", matrix=matrix)

    @property
    def dim(self):
        return len(self.matrix) if self.matrix is not None and self.variant == "linear" else 1

    def matrix_array(self):
        return np.array(self.matrix, dtype=float)

    def is_diagonal(self):
        m = self.matrix
        return all(m[i][j] == 0 for i in range(len(m)) for j in range(len(m)) if i != j)

    def to_dict(self):
        def enc(v):
            if isinstance(v, Fraction):
                return str(v)
            return v

        d = {"variant": self.variant}
        if self.lam is not None:
            d["lam"] = enc(self.lam)
        if self.matrix is not None:
            d["matrix"] = [[enc(v) for v in r] for r in self.matrix]
        if self.variant == "mixture":
            d.update(w1=enc(self.w1), w2=enc(self.w2), c=enc(self.c))
        return d

    @classmethod
    def from_dict(cls, d):
        def dec(v):
            if isinstance(v, str):
                return Fraction(v)
            if isinstance(v, int):
                return Fraction(v)
            return v

        kw = {k: dec(v) for k, v in d.items() if k in ("lam", "w1", "w2", "c")}
        if "matrix" in d:
            kw["matrix"] = [[dec(v) for v in r] for r in d["matrix"]]
        return cls(d["variant"], **kw)

    @classmethod
    def parse(cls, text: str) -> "OuterMeasureSpec":
        """``"contraction:lam=1/2"``, ``"mixture:w1=10/11,w2=1/11,c=10/3"``, ``"angular:matrix=2;0|0;3"``."""
        name, _, rest = text.partition(":")
        d = {"variant": name.strip()}
        for part in filter(str.strip, rest.split(",")):
            k, eq, v = part.partition("=")
            if not eq:
                raise DomainError(f"expected key=value, got {part.strip()!r}")
            k, v = k.strip(), v.strip()
            if k == "matrix":
                d[k] = [[str(parse_scalar(x)) for x in row.split(";")] for row in v.split("|")]
            elif k in ("lam", "w1", "w2", "c"):
                d[k] = str(parse_scalar(v))
            else:
                raise DomainError(f"unknown outer-measure key {k!r}")
        return cls.from_dict(d)


# ---------------------------------------------------------------------------


def _is_exact(v):
    return isinstance(v, (int, Fraction))


def _exactify_iu(a: IntervalUnion):
    return IntervalUnion([(Fraction(x), Fraction(y)) for x, y in a], closed=a.closed)


def _exactify_bu(a: BoxUnion):
    return BoxUnion([(tuple(Fraction(v) for v in lo), tuple(Fraction(v) for v in hi)) for lo, hi in a], dim=a.dim)


def _all_exact_iu(a):
    return all(_is_exact(x) and _is_exact(y) for x, y in a)


def _check_bounded(a):
    vals = [v for pair in a for v in pair] if isinstance(a, IntervalUnion) else [
        v for lo, hi in a for v in (*lo, *hi)]
    if any(isinstance(v, float) and not math.isfinite(v) for v in vals):
        raise DomainError("nu is evaluated on bounded sets only")


def _contraction_union(a: IntervalUnion, lam) -> IntervalUnion:
    """``U_{j>=1} lam^j a`` truncated where the remaining terms change nothing."""
    lo, hi = a.inf, a.sup
    if lo < 0:
        raise DomainError("contraction outer measure lives on the positive half-line")
    terms = []
    f = lam
    if lo > 0:
        # lam^j a lies below inf(a) once lam^j sup(a) <= inf(a)
        while f * hi > lo:
            terms.append(a.scale(f))
            f *= lam
    else:
        # a contains [0, delta); later terms sit inside [0, lam*delta) c lam*a
        delta = a.intervals[0][1]
        while f * hi > lam * delta:
            terms.append(a.scale(f))
            f *= lam
        if not terms:
            terms.append(a.scale(lam))
    return union_all(terms, closed=a.closed)


def _nu_contraction(a: IntervalUnion, lam):
    return a.difference(_contraction_union(a, lam)).measure()


def _sup_norm_extent(boxes):
    r_in = None
    r_out = 0
    for lo, hi in boxes:
        # sup-norm distance from the origin to the box
        gap = 0
        for l, h in zip(lo, hi):
            if l > 0:
                gap = max(gap, l)
            elif h <= 0:
                gap = max(gap, -h)
        r_in = gap if r_in is None else min(r_in, gap)
        r_out = max(r_out, max(max(abs(l), abs(h)) for l, h in zip(lo, hi)))
    return r_in or 0, r_out


def _linear_terms(a: BoxUnion, spec: OuterMeasureSpec):
    """Number of transform terms needed before the remainder is negligible."""
    M = spec.matrix_array()
    det = abs(np.linalg.det(M))
    r_in, r_out = _sup_norm_extent(a.boxes)
    r_in, r_out = float(r_in), float(r_out)
    P = np.eye(len(M))
    for j in range(1, 10_000):
        P = P @ M
        grow = np.abs(P).sum(axis=1).max()  # induced sup-norm of M^j
        if r_in > 0 and grow * r_out < r_in:
            return j - 1
        if det**j < TAIL:
            return j
    raise DomainError("transform family did not contract")


def _nu_linear_diag(a: BoxUnion, spec: OuterMeasureSpec):
    J = _linear_terms(a, spec)
    diag = [spec.matrix[i][i] for i in range(len(spec.matrix))]
    exact = all(_is_exact(v) for v in diag)
    if exact:
        a = _exactify_bu(a)
    else:
        diag = [float(v) for v in diag]
    removed = []
    f = [1] * len(diag)
    for _ in range(J):
        f = [x * y for x, y in zip(f, diag)]
        removed.extend(a.scale_diag(f).boxes)
    return union_measure_minus(a, removed)


def _nu_linear_polygon(a: BoxUnion, spec: OuterMeasureSpec):
    from shapely.affinity import affine_transform
    from shapely.geometry import box as sbox
    from shapely.ops import unary_union

    J = _linear_terms(a, spec)
    base = unary_union([sbox(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])) for lo, hi in a])
    M = spec.matrix_array()
    P = np.eye(2)
    parts = []
    for _ in range(J):
        P = P @ M
        parts.append(affine_transform(base, [P[0, 0], P[0, 1], P[1, 0], P[1, 1], 0.0, 0.0]))
    if not parts:
        return base.area
    return base.difference(unary_union(parts)).area


def angular_coefficients(matrix, theta_angle: float, cap: float) -> list:
    """``|M^l e|^2`` for l = 0, 1, ... up to the first value above ``cap``."""
    M = np.array(matrix, dtype=float)
    v = np.array([math.cos(theta_angle), math.sin(theta_angle)])
    out = []
    for _ in range(4096):
        c = float(v @ v)
        out.append(c)
        if c > cap:
            break
        v = M @ v
    return out


def _angular_section(a: IntervalUnion, matrix, angle: float) -> float:
    """``|U_l a / c_l(angle)|`` for one angle."""
    hi = float(a.sup)
    size = float(a.measure())
    cap = hi / (TAIL * max(size, 1e-300))
    cs = angular_coefficients(matrix, angle, cap)
    af = a.to_float()
    return union_all([af.scale(1.0 / c) for c in cs]).measure()


ANGULAR_NODES = 1 << 14


def _sections(a: IntervalUnion, matrix, angles: np.ndarray) -> np.ndarray:
    """``_angular_section`` evaluated at many angles at once."""
    hi = float(a.sup)
    cap = hi / (TAIL * max(float(a.measure()), 1e-300))
    M = np.array(matrix, dtype=float)
    v = np.stack([np.cos(angles), np.sin(angles)])
    cs = []
    alive = np.ones(len(angles), dtype=bool)
    for _ in range(4096):
        c = np.einsum("ij,ij->j", v, v)
        cs.append(np.where(alive, c, np.inf))
        alive &= c <= cap
        if not alive.any():
            break
        v = M @ v
    C = np.stack(cs, axis=1)  # (T, L); inf rows contribute empty intervals
    iv = np.array([(float(x), float(y)) for x, y in a])
    lo = (iv[None, None, :, 0] / C[:, :, None]).reshape(len(angles), -1)
    up = (iv[None, None, :, 1] / C[:, :, None]).reshape(len(angles), -1)
    order = np.argsort(lo, axis=1)
    lo = np.take_along_axis(lo, order, axis=1)
    up = np.take_along_axis(up, order, axis=1)
    reach = np.maximum.accumulate(up, axis=1)
    prev = np.concatenate([np.full((len(angles), 1), -np.inf), reach[:, :-1]], axis=1)
    return np.sum(np.clip(up - np.maximum(lo, prev), 0.0, None), axis=1)


def _nu_angular(a: IntervalUnion, spec: OuterMeasureSpec):
    """theta * mean over the half-circle of the section measure (midpoint rule)."""
    theta = 1 - 1 / abs(float(np.linalg.det(spec.matrix_array())))
    t = (np.arange(ANGULAR_NODES) + 0.5) * (math.pi / ANGULAR_NODES)
    return theta * float(np.mean(_sections(a, spec.matrix, t)))


def nu_eval(spec: OuterMeasureSpec, a):
    """Exact nu(a) (rational when the inputs are rational)."""
    _check_bounded(a)
    if a.is_empty():
        return 0
    if spec.variant == "lebesgue":
        return a.measure()
    if spec.variant == "contraction":
        if not isinstance(a, IntervalUnion):
            raise UnsupportedOperation("contraction family acts on interval unions")
        if _is_exact(spec.lam) or isinstance(spec.lam, float):
            lam = Fraction(spec.lam)
            res = _nu_contraction(_exactify_iu(a), lam)
            return res if (_is_exact(spec.lam) and _all_exact_iu(a)) else float(res)
    if spec.variant == "mixture":
        if not isinstance(a, IntervalUnion):
            raise UnsupportedOperation("mixture outer measure acts on interval unions")
        exact = _is_exact(spec.c) and _all_exact_iu(a) and _is_exact(spec.w1) and _is_exact(spec.w2)
        ae = _exactify_iu(a)
        c = Fraction(spec.c)
        res = Fraction(spec.w1) * ae.measure() + Fraction(spec.w2) * ae.difference(ae.scale(c)).measure()
        return res if exact else float(res)
    if spec.variant == "linear":
        if isinstance(a, IntervalUnion):
            if spec.dim != 1:
                raise DomainError("dimension mismatch between set and matrix")
            m = spec.matrix[0][0]
            a = BoxUnion([((x,), (y,)) for x, y in a], dim=1)
            spec = OuterMeasureSpec.linear([[m]])
        if a.dim != spec.dim:
            raise DomainError("dimension mismatch between set and matrix")
        if spec.is_diagonal():
            res = _nu_linear_diag(a, spec)
            exact = all(_is_exact(v) for lo, hi in a for v in (*lo, *hi)) and all(
                _is_exact(spec.matrix[i][i]) for i in range(spec.dim))
            return res if exact else float(res)
        if spec.dim == 2:
            return _nu_linear_polygon(a, spec)
        raise UnsupportedOperation("non-diagonal linear families are implemented only in dimension 2")
    if spec.variant == "angular":
        if not isinstance(a, IntervalUnion):
            raise UnsupportedOperation("angular stacks act on mark intervals")
        if a.inf < 0:
            raise DomainError("marks must be nonnegative")
        return _nu_angular(a, spec)
    raise UnsupportedOperation(f"variant {spec.variant}")


# ---------------------------------------------------------------------------
# Monte-Carlo oracle


class MCEstimate(NamedTuple):
    estimate: float
    sigma: float


def _bbox(a):
    if isinstance(a, IntervalUnion):
        return np.array([float(a.inf)]), np.array([float(a.sup)])
    lo, hi = a.bbox()
    return np.array([float(v) for v in lo]), np.array([float(v) for v in hi])


def _member(a, pts):
    if isinstance(a, IntervalUnion):
        return a.contains_array(pts[:, 0])
    return a.contains_array(pts)


def nu_monte_carlo(spec: OuterMeasureSpec, a, samples: int, seed) -> MCEstimate:
    """Rejection estimate of nu(a) by uniform sampling over a's bounding box."""
    if samples < 10**4:
        raise DomainError("Monte-Carlo oracle needs at least 1e4 samples")
    if a.is_empty():
        return MCEstimate(0.0, 0.0)
    rng = np.random.default_rng(seed)
    if spec.variant == "angular":
        hi = float(a.sup)
        theta = 1 - 1 / abs(float(np.linalg.det(spec.matrix_array())))
        ang = rng.uniform(0, 2 * math.pi, samples)
        u = rng.uniform(0, hi, samples)
        M = spec.matrix_array()
        v = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        hit = np.zeros(samples, dtype=bool)
        alive = np.ones(samples, dtype=bool)
        af = a.to_float()
        while alive.any():
            c = np.einsum("ij,ij->i", v, v)
            marks = u * c
            hit |= alive & af.contains_array(marks)
            alive &= marks <= hi
            v = v @ M.T
        f = theta * hi * hit
        return MCEstimate(float(f.mean()), float(f.std(ddof=1) / math.sqrt(samples)))
    lo, hi = _bbox(a)
    vol = float(np.prod(hi - lo))
    pts = lo + (hi - lo) * rng.random((samples, len(lo)))
    inA = _member(a, pts)
    if spec.variant == "lebesgue":
        f = inA.astype(float)
    elif spec.variant == "mixture":
        c = float(spec.c)
        f = float(spec.w1) * inA + float(spec.w2) * (inA & ~_member(a, pts / c))
    elif spec.variant == "contraction":
        lam = float(spec.lam)
        top = float(a.sup)
        excl = np.zeros(samples, dtype=bool)
        y = pts.copy()
        alive = inA & (y[:, 0] > 0)
        while alive.any():
            y[alive] /= lam
            excl |= alive & _member(a, y)
            alive &= y[:, 0] < top
        f = (inA & ~excl).astype(float)
    elif spec.variant == "linear":
        if isinstance(a, IntervalUnion):
            a = BoxUnion([((x,), (y,)) for x, y in a], dim=1)
        J = _linear_terms(a, spec)
        Minv = np.linalg.inv(spec.matrix_array())
        excl = np.zeros(samples, dtype=bool)
        y = pts.copy()
        for _ in range(J):
            y = y @ Minv.T
            excl |= a.contains_array(y)
        f = (inA & ~excl).astype(float)
    else:
        raise UnsupportedOperation(spec.variant)
    f = vol * f
    return MCEstimate(float(f.mean()), float(f.std(ddof=1) / math.sqrt(samples)))


def empirical_nu(spec, obs, ts, a: IntervalUnion, q: int):
    """``n |A_n^(q)|`` computed exactly from the exceedance geometry."""
    from .empirical import aq_set, mark_set

    an = mark_set(ts, a)
    aq = aq_set(an, spec, q)
    return ts.n * aq.measure()
