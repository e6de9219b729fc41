"""Finite unions of half-open intervals and axis-aligned boxes.

Endpoints may be ``Fraction`` or ``float``; rational inputs stay exact
through every operation. An :class:`IntervalUnion` stores its components as
``[a, b)`` pairs. The ``closed`` attribute only affects point membership:
``"left"`` means ``[a, b)`` and ``"right"`` means ``(a, b]``, which is the
convention used for mark bands.
"""
from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError


def _merge(pairs):
    pairs = sorted((a, b) for a, b in pairs if a < b)
    out = []
    for a, b in pairs:
        if out and a <= out[-1][1]:
            if b > out[-1][1]:
                out[-1] = (out[-1][0], b)
        else:
            out.append((a, b))
    return out


class IntervalUnion:
    __slots__ = ("_iv", "closed")

    def __init__(self, intervals: Iterable[tuple] = (), closed: str = "left"):
        if closed not in ("left", "right"):
            raise DomainError(f"closed must be 'left' or 'right', got {closed!r}")
        self._iv = tuple(_merge(intervals))
        self.closed = closed

    @classmethod
    def interval(cls, a, b, closed="left"):
        return cls([(a, b)], closed=closed)

    @classmethod
    def ball(cls, center, radius, circle: bool = True):
        """Ball of the given radius; on the circle it wraps around 0."""
        if radius < 0:
            raise DomainError("negative radius")
        if not circle:
            return cls([(center - radius, center + radius)])
        if 2 * radius >= 1:
            return cls([(0, 1)])
        return cls([(center - radius, center + radius)]).mod1()

    @classmethod
    def empty(cls, closed="left"):
        return cls((), closed=closed)

    @property
    def intervals(self) -> tuple:
        return self._iv

    def __iter__(self):
        return iter(self._iv)

    def __len__(self):
        return len(self._iv)

    def __bool__(self):
        return bool(self._iv)

    def __eq__(self, other):
        if not isinstance(other, IntervalUnion):
            return NotImplemented
        return self._iv == other._iv

    def __hash__(self):
        return hash(self._iv)

    def __repr__(self):
        br = ("[", ")") if self.closed == "left" else ("(", "]")
        body = " ∪ ".join(f"{br[0]}{a}, {b}{br[1]}" for a, b in self._iv)
        return f"IntervalUnion({body or '∅'})"

    def _like(self, pairs):
        return IntervalUnion(pairs, closed=self.closed)

    def measure(self):
        return sum((b - a for a, b in self._iv), 0)

    def is_empty(self):
        return not self._iv

    @property
    def inf(self):
        if not self._iv:
            raise DomainError("empty union has no infimum")
        return self._iv[0][0]

    @property
    def sup(self):
        if not self._iv:
            raise DomainError("empty union has no supremum")
        return self._iv[-1][1]

    # set algebra -----------------------------------------------------
    def union(self, other: "IntervalUnion") -> "IntervalUnion":
        return self._like(self._iv + other._iv)

    def intersection(self, other: "IntervalUnion") -> "IntervalUnion":
        a, b = self._iv, other._iv
        i = j = 0
        out = []
        while i < len(a) and j < len(b):
            lo = max(a[i][0], b[j][0])
            hi = min(a[i][1], b[j][1])
            if lo < hi:
                out.append((lo, hi))
            if a[i][1] < b[j][1]:
                i += 1
            else:
                j += 1
        return self._like(out)

    def difference(self, other: "IntervalUnion") -> "IntervalUnion":
        out = []
        b = other._iv
        j = 0
        for lo, hi in self._iv:
            while j < len(b) and b[j][1] <= lo:
                j += 1
            cur = lo
            k = j
            while k < len(b) and b[k][0] < hi:
                if b[k][0] > cur:
                    out.append((cur, b[k][0]))
                cur = max(cur, b[k][1])
                k += 1
            if cur < hi:
                out.append((cur, hi))
        return self._like(out)

    __or__ = union
    __and__ = intersection
    __sub__ = difference

    def intersects(self, other: "IntervalUnion") -> bool:
        return not self.intersection(other).is_empty()

    def issubset(self, other: "IntervalUnion") -> bool:
        return self.difference(other).is_empty()

    def complement(self, lo=0, hi=1) -> "IntervalUnion":
        return self._like([(lo, hi)]).difference(self)

    # transformations ---------------------------------------------------
    def scale(self, c) -> "IntervalUnion":
        if c == 0:
            raise DomainError("scale factor must be nonzero")
        if c > 0:
            return self._like((a * c, b * c) for a, b in self._iv)
        return self._like((b * c, a * c) for a, b in self._iv)

    def translate(self, t) -> "IntervalUnion":
        return self._like((a + t, b + t) for a, b in self._iv)

    def mod1(self) -> "IntervalUnion":
        """Wrap onto the circle [0, 1)."""
        out = []
        for a, b in self._iv:
            if b - a >= 1:
                return self._like([(0, 1)])
            k = _floor(a)
            a2, b2 = a - k, b - k
            if b2 <= 1:
                out.append((a2, b2))
            else:
                out.append((a2, 1))
                out.append((0, b2 - 1))
        return self._like(out)

    def contains(self, x) -> bool:
        for a, b in self._iv:
            if self.closed == "left":
                if a <= x < b:
                    return True
            elif a < x <= b:
                return True
        return False

    __contains__ = contains

    def contains_array(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if not self._iv:
            return np.zeros(xs.shape, dtype=bool)
        lo = np.array([float(a) for a, _ in self._iv])
        hi = np.array([float(b) for _, b in self._iv])
        if self.closed == "left":
            k = np.searchsorted(lo, xs, side="right") - 1
            ok = k >= 0
            kk = np.clip(k, 0, None)
            return ok & (xs < hi[kk])
        k = np.searchsorted(lo, xs, side="left") - 1
        ok = k >= 0
        kk = np.clip(k, 0, None)
        return ok & (xs <= hi[kk])

    def to_float(self) -> "IntervalUnion":
        return self._like((float(a), float(b)) for a, b in self._iv)

    def to_list(self):
        return [[_num_out(a), _num_out(b)] for a, b in self._iv]


def _floor(x):
    if isinstance(x, Fraction):
        return x.numerator // x.denominator
    return int(np.floor(x))


def _num_out(x):
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else int(x)
    return x


def union_all(sets: Iterable[IntervalUnion], closed="left") -> IntervalUnion:
    pairs = []
    for s in sets:
        pairs.extend(s.intervals)
    return IntervalUnion(pairs, closed=closed)


# ---------------------------------------------------------------------------
# boxes


Box = tuple  # (lo tuple, hi tuple)


def _box_volume(lo, hi):
    v = 1
    for a, b in zip(lo, hi):
        if b <= a:
            return 0
        v = v * (b - a)
    return v


def _box_intersect(b1, b2):
    lo = tuple(max(a, c) for a, c in zip(b1[0], b2[0]))
    hi = tuple(min(a, c) for a, c in zip(b1[1], b2[1]))
    if all(a < b for a, b in zip(lo, hi)):
        return lo, hi
    return None


def grid_cells(boxes: Sequence[Box]):
    """Coordinate-compression grid spanned by the boxes' faces.

    Returns per-axis sorted edges and the float cell centres as an array of
    shape ``(n_cells, d)``; cells are enumerated in C order.
    """
    d = len(boxes[0][0])
    edges = []
    for k in range(d):
        vals = sorted(set(itertools.chain.from_iterable((b[0][k], b[1][k]) for b in boxes)))
        edges.append(vals)
    mids = [np.array([(float(e[i]) + float(e[i + 1])) / 2 for i in range(len(e) - 1)]) for e in edges]
    mesh = np.meshgrid(*mids, indexing="ij")
    centres = np.stack([m.ravel() for m in mesh], axis=-1)
    return edges, centres


def _inside(centres, boxes):
    lo = np.array([[float(v) for v in b[0]] for b in boxes])
    hi = np.array([[float(v) for v in b[1]] for b in boxes])
    c = centres[:, None, :]
    return np.all((c >= lo[None]) & (c < hi[None]), axis=2)


def _cells_measure(edges, mask):
    """Exact sum of volumes of the masked compression cells."""
    widths = [[e[i + 1] - e[i] for i in range(len(e) - 1)] for e in edges]
    shape = tuple(len(w) for w in widths)
    mask = mask.reshape(shape)
    if not mask.any():
        return 0
    if len(shape) == 1:
        return sum((w for w, m in zip(widths[0], mask) if m), 0)
    total = 0
    for idx in zip(*np.nonzero(mask)):
        v = 1
        for ax, i in enumerate(idx):
            v = v * widths[ax][i]
        total = total + v
    return total


def _cells_to_boxes(edges, mask):
    shape = tuple(len(e) - 1 for e in edges)
    mask = mask.reshape(shape)
    out = []
    for idx in zip(*np.nonzero(mask)):
        lo = tuple(edges[ax][i] for ax, i in enumerate(idx))
        hi = tuple(edges[ax][i + 1] for ax, i in enumerate(idx))
        out.append((lo, hi))
    return out


class BoxUnion:
    """Finite union of half-open boxes ``[lo, hi)`` in dimension d."""

    __slots__ = ("_boxes", "dim")

    def __init__(self, boxes: Iterable[Box] = (), dim: int | None = None):
        bx = []
        for lo, hi in boxes:
            lo, hi = tuple(lo), tuple(hi)
            if len(lo) != len(hi):
                raise DomainError("box corners differ in dimension")
            if _box_volume(lo, hi) > 0:
                bx.append((lo, hi))
        if dim is None:
            if not bx:
                raise DomainError("dimension required for an empty BoxUnion")
            dim = len(bx[0][0])
        if any(len(b[0]) != dim for b in bx):
            raise DomainError("mixed box dimensions")
        self.dim = dim
        overlap = any(
            _box_intersect(bx[i], bx[j]) is not None
            for i in range(len(bx))
            for j in range(i + 1, len(bx))
        )
        if overlap:
            edges, centres = grid_cells(bx)
            bx = _cells_to_boxes(edges, _inside(centres, bx).any(axis=1))
        self._boxes = tuple(sorted(bx))

    @classmethod
    def box(cls, lo, hi):
        return cls([(tuple(lo), tuple(hi))])

    @property
    def boxes(self):
        return self._boxes

    def __len__(self):
        return len(self._boxes)

    def __iter__(self):
        return iter(self._boxes)

    def __repr__(self):
        return f"BoxUnion({list(self._boxes)})"

    def __eq__(self, other):
        if not isinstance(other, BoxUnion):
            return NotImplemented
        return self.dim == other.dim and self.measure() == other.measure() and (
            self.difference(other).is_empty() and other.difference(self).is_empty()
        )

    def is_empty(self):
        return not self._boxes

    def measure(self):
        return sum((_box_volume(*b) for b in self._boxes), 0)

    def bbox(self):
        if not self._boxes:
            raise DomainError("empty BoxUnion has no bounding box")
        lo = tuple(min(b[0][k] for b in self._boxes) for k in range(self.dim))
        hi = tuple(max(b[1][k] for b in self._boxes) for k in range(self.dim))
        return lo, hi

    def union(self, other: "BoxUnion") -> "BoxUnion":
        return BoxUnion(self._boxes + other._boxes, dim=self.dim)

    def intersection(self, other: "BoxUnion") -> "BoxUnion":
        out = []
        for b1 in self._boxes:
            for b2 in other._boxes:
                r = _box_intersect(b1, b2)
                if r is not None:
                    out.append(r)
        return BoxUnion(out, dim=self.dim)

    def difference(self, other: "BoxUnion") -> "BoxUnion":
        if not self._boxes or not other._boxes:
            return self
        allb = list(self._boxes) + list(other._boxes)
        edges, centres = grid_cells(allb)
        ins = _inside(centres, self._boxes).any(axis=1)
        out = _inside(centres, other._boxes).any(axis=1)
        return BoxUnion(_cells_to_boxes(edges, ins & ~out), dim=self.dim)

    def scale_diag(self, factors) -> "BoxUnion":
        out = []
        for lo, hi in self._boxes:
            a = [l * f for l, f in zip(lo, factors)]
            b = [h * f for h, f in zip(hi, factors)]
            out.append((tuple(min(x, y) for x, y in zip(a, b)), tuple(max(x, y) for x, y in zip(a, b))))
        return BoxUnion(out, dim=self.dim)

    def translate(self, v) -> "BoxUnion":
        return BoxUnion(
            [(tuple(l + t for l, t in zip(lo, v)), tuple(h + t for h, t in zip(hi, v))) for lo, hi in self._boxes],
            dim=self.dim,
        )

    def contains_array(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if not self._boxes:
            return np.zeros(len(pts), dtype=bool)
        return _inside(pts, self._boxes).any(axis=1)

    def contains(self, p) -> bool:
        return bool(self.contains_array([p])[0])

    __contains__ = contains

    def to_list(self):
        return [[[_num_out(v) for v in lo], [_num_out(v) for v in hi]] for lo, hi in self._boxes]


def union_measure_minus(a: BoxUnion, removed: Sequence[Box]):
    """Exact ``|a \\ (union of removed boxes)|`` by coordinate compression."""
    if a.is_empty():
        return 0
    if not removed:
        return a.measure()
    allb = list(a.boxes) + list(removed)
    edges, centres = grid_cells(allb)
    ins = _inside(centres, a.boxes).any(axis=1)
    out = _inside(centres, removed).any(axis=1)
    return _cells_measure(edges, ins & ~out)
