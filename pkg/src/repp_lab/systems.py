"""Dynamical systems: map descriptors, exact digit-shift orbits, interval maps.

The orbit of a Lebesgue-random point under ``x -> b x mod 1`` is the shift
on its base-b expansion, so a stream of iid uniform digits *is* an exact
orbit. Digits are packed into 64-bit words holding ``D = floor(64 / log2 b)``
digits each; the D-digit window starting at any position is assembled from
two consecutive words with integer arithmetic, which lets whole orbits be
scanned with numpy.
"""
from __future__ import annotations

import functools
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DomainError, IntervalCapError, ResolutionError, UnsupportedOperation
from .intervals import IntervalUnion, union_all

DIGIT_SHIFT = "digit_shift"
PIECEWISE_AFFINE = "piecewise_affine"
INTERMITTENT = "intermittent"
KINDS = (DIGIT_SHIFT, PIECEWISE_AFFINE, INTERMITTENT)
MEASURES = ("lebesgue", "birkhoff")

RESOLUTION_CAP = 4096
INTERVAL_CAP = 10**6
CHUNK_WORDS = 1 << 14


# ---------------------------------------------------------------------------
# points


def _atan_inv_fixed(x: int, one: int) -> tuple[int, int]:
    """``atan(1/x) * one`` by its Taylor series; returns (value, term count)."""
    total = 0
    power = one // x
    x2 = x * x
    k = 0
    while power:
        term = power // (2 * k + 1)
        total += -term if k % 2 else term
        power //= x2
        k += 1
    return total, k


def pi_fixed(bits: int) -> tuple[int, int]:
    """Return ``(P, err)`` with ``|P - pi * 2**bits| <= err`` (Machin's formula)."""
    one = 1 << bits
    a, na = _atan_inv_fixed(5, one)
    b, nb = _atan_inv_fixed(239, one)
    return 16 * a - 4 * b, 16 * (na + 1) + 4 * (nb + 1)


@dataclass(frozen=True)
class PiMultiple:
    """The real number ``coef * pi`` with rational ``coef``."""

    coef: Fraction

    def __float__(self):
        return float(self.coef) * math.pi

    def floor_scaled(self, scale: int) -> int:
        """Exact ``floor(coef * pi * scale)`` for a positive integer scale."""
        num, den = self.coef.numerator, self.coef.denominator
        bits = scale.bit_length() + abs(num).bit_length() + 64
        while True:
            p, err = pi_fixed(bits)
            lo = ((p - err) * num * scale) // (den << bits)
            hi = ((p + err) * num * scale) // (den << bits)
            if num < 0:
                lo, hi = hi, lo
            if lo == hi:
                return lo
            bits += 64

    def __str__(self):
        if self.coef == 1:
            return "pi"
        n, d = self.coef.numerator, self.coef.denominator
        head = "pi" if n == 1 else f"{n}*pi"
        return head if d == 1 else f"{head}/{d}"


Scalar = "Fraction | float | PiMultiple"

_PI_RE = re.compile(r"^\s*(?:(?P<num>[-+]?\d+)\s*\*\s*)?pi\s*(?:/\s*(?P<den>\d+))?\s*$")


def parse_scalar(text):
    """Parse ``"1/3"``, ``"0.25"``, ``"pi/16"``, ``"3*pi/16"``.

    Integers and fractions become exact ``Fraction`` values, decimals become
    floats; ``pi`` multiples stay symbolic so their digits can be computed
    exactly.
    """
    if isinstance(text, (Fraction, PiMultiple)):
        return text
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, float):
        if not math.isfinite(text):
            raise DomainError(f"non-finite coordinate {text!r}")
        return text
    s = str(text).strip()
    m = _PI_RE.match(s)
    if m:
        num = int(m.group("num") or 1)
        den = int(m.group("den") or 1)
        return PiMultiple(Fraction(num, den))
    if re.fullmatch(r"[-+]?\d+(/\d+)?", s):
        return Fraction(s)
    try:
        v = float(s)
    except ValueError:
        raise DomainError(f"cannot parse coordinate {text!r}") from None
    if not math.isfinite(v):
        raise DomainError(f"non-finite coordinate {text!r}")
    return v


def parse_point(text) -> tuple:
    """Parse a point such as ``"pi/16"`` or ``"0,0"`` into a coordinate tuple."""
    if isinstance(text, (tuple, list)):
        return tuple(parse_scalar(t) for t in text)
    parts = [p for p in str(text).strip().strip("()").split(",") if p.strip()]
    if not parts:
        raise DomainError("empty point")
    return tuple(parse_scalar(p) for p in parts)


def as_real(x):
    """Exact value where possible: Fraction stays, floats convert exactly, pi multiples become floats."""
    if isinstance(x, PiMultiple):
        return float(x)
    return x


def scalar_str(x) -> str:
    if isinstance(x, Fraction):
        return str(x)
    return str(x) if isinstance(x, PiMultiple) else repr(float(x))


def digits_floor(x, base: int, k: int) -> int:
    """``floor(frac(x) * base**k)`` computed exactly."""
    scale = base**k
    if isinstance(x, PiMultiple):
        return x.floor_scaled(scale) - x.floor_scaled(1) * scale
    fx = Fraction(x)
    fx -= math.floor(fx)
    return math.floor(fx * scale)


def circle_distance(x, z):
    d = (x - z) % 1
    return min(d, 1 - d)


# ---------------------------------------------------------------------------
# system descriptor


@dataclass(frozen=True)
class Branch:
    lo: Fraction | float
    hi: Fraction | float
    slope: Fraction | float
    offset: Fraction | float

    def __call__(self, x):
        return self.slope * x + self.offset


@dataclass(frozen=True)
class SystemSpec:
    kind: str
    bases: tuple = ()
    branches: tuple = ()
    alpha: float | None = None
    measure: str = "lebesgue"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown system kind {self.kind!r}")
        if self.measure not in MEASURES:
            raise DomainError(f"unknown measure model {self.measure!r}")
        if self.kind == DIGIT_SHIFT:
            if not self.bases or any(int(b) != b or b < 2 for b in self.bases):
                raise DomainError("digit-shift bases must be integers >= 2")
        elif self.kind == PIECEWISE_AFFINE:
            br = self.branches
            if not br:
                raise DomainError("piecewise-affine map needs branches")
            if br[0].lo != 0 or br[-1].hi != 1:
                raise DomainError("branches must cover [0, 1)")
            for a, b in zip(br, br[1:]):
                if a.hi != b.lo:
                    raise DomainError("branch domains must partition [0, 1) without overlap or gap")
            if any(b.lo >= b.hi or b.slope == 0 for b in br):
                raise DomainError("degenerate branch")
            if self.measure == "lebesgue" and not self._preserves_lebesgue():
                raise DomainError("LebesgueInvariant declared for a map that does not preserve Lebesgue")
        else:
            if self.alpha is None or not (0 < self.alpha < 1):
                raise DomainError("intermittent exponent must lie in (0, 1)")
            if self.measure == "lebesgue":
                raise DomainError("intermittent maps do not preserve Lebesgue")

    def _preserves_lebesgue(self):
        # every branch must wrap exactly once around the circle
        return all(abs(abs((b.hi - b.lo) * b.slope) - 1) < 1e-12 for b in self.branches)

    @property
    def dimension(self) -> int:
        return len(self.bases) if self.kind == DIGIT_SHIFT else 1

    def affine_branches(self) -> tuple:
        if self.kind == PIECEWISE_AFFINE:
            return self.branches
        if self.kind == DIGIT_SHIFT:
            if self.dimension != 1:
                raise UnsupportedOperation("interval maps are one-dimensional")
            b = self.bases[0]
            return tuple(Branch(Fraction(k, b), Fraction(k + 1, b), Fraction(b), Fraction(-k)) for k in range(b))
        raise UnsupportedOperation("intermittent maps have no affine branches")

    def __call__(self, x):
        """Apply the map once to a scalar (d = 1) point."""
        if self.kind == INTERMITTENT:
            x = float(x)
            if x < 0.5:
                return x * (1 + (2 * x) ** self.alpha)
            return 2 * x - 1
        for br in self.affine_branches():
            if br.lo <= x < br.hi:
                return br(x) % 1
        raise DomainError(f"point {x!r} outside [0, 1)")

    def derivative(self, x):
        if self.kind == INTERMITTENT:
            x = float(x)
            return 1 + (self.alpha + 1) * (2 * x) ** self.alpha if x < 0.5 else 2.0
        for br in self.affine_branches():
            if br.lo <= x < br.hi:
                return br.slope
        raise DomainError(f"point {x!r} outside [0, 1)")

    # serialization --------------------------------------------------------
    def to_text(self) -> str:
        lines = [f"kind={self.kind}"]
        if self.kind == DIGIT_SHIFT:
            lines.append("bases=" + ",".join(str(b) for b in self.bases))
        elif self.kind == PIECEWISE_AFFINE:
            lines.append("branches=" + "; ".join(
                ":".join(scalar_str(v) for v in (b.lo, b.hi, b.slope, b.offset)) for b in self.branches))
        else:
            lines.append(f"alpha={self.alpha!r}")
        lines.append(f"measure={self.measure}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SystemSpec":
        return cls.from_mapping(parse_kv(text))

    @classmethod
    def from_mapping(cls, kv: dict) -> "SystemSpec":
        kv = dict(kv)
        kind = kv.pop("kind", None)
        if kind is None:
            raise DomainError("system block lacks 'kind'")
        measure = kv.pop("measure", None)
        kw = {}
        if kind == DIGIT_SHIFT:
            kw["bases"] = tuple(int(b) for b in kv.pop("bases", "").split(",") if b.strip())
        elif kind == PIECEWISE_AFFINE:
            brs = []
            for part in kv.pop("branches", "").split(";"):
                if part.strip():
                    vals = [parse_scalar(v) for v in part.split(":")]
                    if len(vals) != 4:
                        raise DomainError(f"branch {part!r} needs lo:hi:slope:offset")
                    brs.append(Branch(*vals))
            kw["branches"] = tuple(brs)
        elif kind == INTERMITTENT:
            kw["alpha"] = float(kv.pop("alpha", "nan"))
        if kv:
            raise DomainError(f"unknown system keys: {', '.join(sorted(kv))}")
        if measure is None:
            measure = "birkhoff" if kind == INTERMITTENT else "lebesgue"
        return cls(kind=kind, measure=measure, **kw)


def parse_kv(text: str) -> dict:
    """Parse a flat ``key=value`` block; ``#`` starts a comment."""
    out = {}
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"line {i}: expected key=value, got {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def doubling() -> SystemSpec:
    return SystemSpec(DIGIT_SHIFT, bases=(2,))


def tripling() -> SystemSpec:
    return SystemSpec(DIGIT_SHIFT, bases=(3,))


def torus23() -> SystemSpec:
    """The product map (2x mod 1, 3y mod 1) on the 2-torus."""
    return SystemSpec(DIGIT_SHIFT, bases=(2, 3))


def piecewise_affine(branches: Sequence[tuple], measure="lebesgue") -> SystemSpec:
    return SystemSpec(PIECEWISE_AFFINE, branches=tuple(Branch(*b) for b in branches), measure=measure)


def affine_doubling() -> SystemSpec:
    h = Fraction(1, 2)
    return piecewise_affine([(0, h, 2, 0), (h, 1, 2, -1)])


def lsv(alpha: float) -> SystemSpec:
    return SystemSpec(INTERMITTENT, alpha=alpha, measure="birkhoff")


# ---------------------------------------------------------------------------
# digit streams


@functools.lru_cache(maxsize=None)
def digits_per_word(base: int) -> int:
    d = 1
    while base ** (d + 1) <= 2**64:
        d += 1
    return d


def seed_sequence(seed, *keys) -> np.random.SeedSequence:
    """Derived seed: ``SeedSequence([seed, *keys])`` (run index, coordinate)."""
    if isinstance(seed, np.random.SeedSequence):
        if not keys:
            return seed
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(int(k) for k in keys))
    if seed is None or int(seed) < 0 or int(seed) >= 2**64:
        raise DomainError("seed must be an unsigned 64-bit integer")
    return np.random.SeedSequence([int(seed), *[int(k) for k in keys]])


class DigitStream:
    """Seeded iid base-b digits, packed D per 64-bit word, drawn in fixed chunks."""

    def __init__(self, base: int, seed):
        self.base = int(base)
        self.D = digits_per_word(self.base)
        self.B = self.base**self.D
        self._rng = np.random.Generator(np.random.PCG64(seed_sequence(seed)))
        self._buf = np.empty(0, dtype=np.uint64)
        self._pos = 0

    def _chunk(self):
        return self._rng.integers(0, self.B, size=CHUNK_WORDS, dtype=np.uint64)

    def words(self, count: int) -> np.ndarray:
        """Next ``count`` words of the stream."""
        parts = []
        need = count
        while need > 0:
            if self._pos >= len(self._buf):
                self._buf = self._chunk()
                self._pos = 0
            take = min(need, len(self._buf) - self._pos)
            parts.append(self._buf[self._pos:self._pos + take])
            self._pos += take
            need -= take
        return np.concatenate(parts) if parts else np.empty(0, dtype=np.uint64)


class FixedDigits:
    """A finite digit string followed by zeros, presented as a word stream."""

    def __init__(self, base: int, digits: Sequence[int]):
        self.base = int(base)
        self.D = digits_per_word(self.base)
        self.B = self.base**self.D
        if any(d < 0 or d >= base for d in digits):
            raise DomainError("digit out of range")
        digits = list(digits)
        digits += [0] * (-len(digits) % self.D)
        ws = []
        for k in range(0, len(digits), self.D):
            v = 0
            for d in digits[k:k + self.D]:
                v = v * self.base + d
            ws.append(v)
        self._words = np.array(ws, dtype=np.uint64)
        self._pos = 0

    def words(self, count: int) -> np.ndarray:
        out = np.zeros(count, dtype=np.uint64)
        avail = self._words[self._pos:self._pos + count]
        out[:len(avail)] = avail
        self._pos += count
        return out


def _pow_table(base: int, D: int):
    return [np.uint64(base**s) for s in range(D)]


def window_matrix(words: np.ndarray, base: int) -> np.ndarray:
    """Windows as a ``(D, len(words) - 1)`` array: row s holds positions ``k*D + s``."""
    D = digits_per_word(base)
    a = words[:-1]
    c = words[1:]
    out = np.empty((D, len(a)), dtype=np.uint64)
    out[0] = a
    if base == 2:
        for s in range(1, D):
            np.bitwise_or(a << np.uint64(s), c >> np.uint64(D - s), out=out[s])
    else:
        pw = _pow_table(base, D)
        for s in range(1, D):
            np.add((a % pw[D - s]) * pw[s], c // pw[D - s], out=out[s])
    return out


def windows(words: np.ndarray, base: int) -> np.ndarray:
    """D-digit windows at every position covered by ``words[:-1]``.

    Entry ``k*D + s`` equals ``floor(x_{kD+s} * b**D)`` where ``x_p`` is the
    point whose expansion starts at digit ``p``.
    """
    return window_matrix(words, base).T.ravel()


def near_mask(Wm: np.ndarray, Z: int, R: int, base: int) -> np.ndarray:
    """Windows within circle distance ``R`` of ``Z`` (integer units)."""
    B = base ** digits_per_word(base)
    if 2 * R + 1 >= B:
        return np.ones(Wm.shape, dtype=bool)
    lo = (Z - R) % B
    if B == 2**64:
        return (Wm - np.uint64(lo)) <= np.uint64(2 * R)
    hi = (Z + R) % B
    if lo <= hi:
        return (Wm >= np.uint64(lo)) & (Wm <= np.uint64(hi))
    return (Wm >= np.uint64(lo)) | (Wm <= np.uint64(hi))


def near_positions(Wm: np.ndarray, Z: int, R: int, base: int, total: int) -> np.ndarray:
    """Sorted positions ``< total`` whose window lies within ``R`` of ``Z`` on the circle."""
    f = np.flatnonzero(near_mask(Wm, Z, R, base))
    s, k = np.divmod(f, Wm.shape[1])
    pos = np.sort(k * Wm.shape[0] + s)
    return pos[pos < total]


def windows_at(words: np.ndarray, base: int, positions: np.ndarray) -> np.ndarray:
    """D-digit windows at selected positions only."""
    D = digits_per_word(base)
    positions = np.asarray(positions, dtype=np.int64)
    k = positions // D
    s = positions % D
    a = words[k]
    c = words[k + 1]
    if base == 2:
        su = s.astype(np.uint64)
        hi = np.where(s == 0, a, a << su)
        lo = np.where(s == 0, np.uint64(0), c >> (np.uint64(D) - su))
        return hi | lo
    pwu = np.array([base**i if base**i < 2**64 else 0 for i in range(D + 1)], dtype=np.uint64)
    out = np.empty(len(positions), dtype=np.uint64)
    zero = s == 0
    out[zero] = a[zero]
    nz = ~zero
    if nz.any():
        ss = s[nz]
        m = pwu[D - ss]
        out[nz] = (a[nz] % m) * pwu[ss] + c[nz] // m
    return out


def circle_dist_ints(W: np.ndarray, Z: int, base: int):
    """Signed and absolute circle distance, in units of ``b**-D``.

    Returns ``(dist, positive)`` where ``positive`` marks ``x`` ahead of ``z``.
    """
    D = digits_per_word(base)
    B = base**D
    Zu = np.uint64(Z)
    if B == 2**64:
        diff = W - Zu
        alt = np.uint64(0) - diff
    else:
        Bu = np.uint64(B)
        diff = np.where(W >= Zu, W - Zu, W - Zu + Bu)
        alt = Bu - diff
    dist = np.minimum(diff, alt)
    return dist, diff <= alt


def _words_to_int(ws, B) -> int:
    v = 0
    for w in ws:
        v = v * B + int(w)
    return v


class _WordBuffer:
    """Growable word buffer over a DigitStream-like source."""

    def __init__(self, source):
        self.source = source
        self.words = np.empty(0, dtype=np.uint64)

    def ensure(self, n_words: int):
        if len(self.words) < n_words:
            extra = max(n_words - len(self.words), 64)
            self.words = np.concatenate([self.words, self.source.words(extra)])

    def digits_int(self, pos: int, K: int) -> int:
        """``floor(x_pos * b**K)``: the K digits starting at ``pos``."""
        src = self.source
        D, b = src.D, src.base
        k0, s = divmod(pos, D)
        k1 = (pos + K - 1) // D
        self.ensure(k1 + 2)
        big = _words_to_int(self.words[k0:k1 + 1], src.B)
        total = (k1 - k0 + 1) * D
        return (big // b ** (total - s - K)) % b**K


@dataclass
class StepResult:
    distance: float
    unresolved: bool


class DigitStreamOrbit:
    """Single-owner orbit engine for a digit-shift system.

    ``distance()`` reports ``dist(T^j x, zeta)`` for the current shift j
    (Euclidean over circle coordinates), exact to ``b**-K`` per coordinate.
    """

    def __init__(self, spec: SystemSpec, zeta, K: int, sources):
        if spec.kind != DIGIT_SHIFT:
            raise DomainError("digit-stream orbits need a digit-shift system")
        if K > RESOLUTION_CAP:
            raise ResolutionError(f"resolution {K} exceeds hard cap {RESOLUTION_CAP} digits")
        zeta = parse_point(zeta)
        if len(zeta) != spec.dimension:
            raise DomainError("zeta dimension does not match the system")
        self.spec = spec
        self.zeta = zeta
        self.K = int(K)
        self._bufs = [_WordBuffer(s) for s in sources]
        self._z = [digits_floor(z, b, self.K) for z, b in zip(zeta, spec.bases)]
        self.position = 0
        self.unresolved = False

    def _coord_dist(self, i: int):
        b = self.spec.bases[i]
        BK = b**self.K
        X = self._bufs[i].digits_int(self.position, self.K)
        diff = (X - self._z[i]) % BK
        d = min(diff, BK - diff)
        return d, BK

    def distance_fraction(self) -> Fraction:
        """Distance estimate as an exact rational (d = 1 only)."""
        if len(self._bufs) != 1:
            raise UnsupportedOperation("exact rational distance defined only for d = 1")
        d, BK = self._coord_dist(0)
        self.unresolved = d <= 1
        return Fraction(d, BK)

    def distance(self) -> float:
        parts = [self._coord_dist(i) for i in range(len(self._bufs))]
        self.unresolved = any(d <= 1 for d, _ in parts)
        if len(parts) == 1:
            d, BK = parts[0]
            return float(Fraction(d, BK))
        return math.sqrt(sum(float(Fraction(d, BK)) ** 2 for d, BK in parts))

    def digits(self, count: int, coord: int = 0) -> list:
        """Digits of the current point (for inspection and tests)."""
        v = self._bufs[coord].digits_int(self.position, count)
        b = self.spec.bases[coord]
        out = []
        for _ in range(count):
            v, r = divmod(v, b)
            out.append(r)
        return out[::-1]

    def step_distance(self) -> float:
        """Advance the shift by one and return the new distance."""
        self.position += 1
        return self.distance()

    def step(self) -> StepResult:
        d = self.step_distance()
        return StepResult(d, self.unresolved)

    @classmethod
    def from_digits(cls, spec: SystemSpec, zeta, digits, K: int | None = None):
        """Orbit of the point with the given expansion (then zeros), d = 1."""
        src = FixedDigits(spec.bases[0], digits)
        return cls(spec, zeta, K or src.D, [src])


def default_resolution(base: int, n: int, horizon: float, tau_min: float, guard: int = 16) -> int:
    """Digits needed to resolve scale ``tau_min / (n H)`` plus guard digits."""
    return math.ceil(math.log(n * horizon / tau_min, base)) + guard


def make_digit_shift(spec: SystemSpec, zeta, K: int, seed) -> DigitStreamOrbit:
    """Orbit engine for a uniform random starting point, seeded per coordinate."""
    if spec.kind != DIGIT_SHIFT:
        raise DomainError("make_digit_shift requires a digit-shift system")
    sources = [DigitStream(b, seed_sequence(seed, 0, i)) for i, b in enumerate(spec.bases)]
    return DigitStreamOrbit(spec, zeta, K, sources)


# ---------------------------------------------------------------------------
# float engine


def iterate_float(spec: SystemSpec, x0, n: int, dither: bool = False, seed=0) -> np.ndarray:
    """``n`` iterates ``T(x0), ..., T^n(x0)`` in double precision.

    ``x0`` may be a scalar or an array of starting points iterated in
    parallel (result shape ``(n, len(x0))``). Dithering adds uniform noise of
    size ``2**-52`` after each step, which stops the orbit from collapsing
    onto a float-periodic cycle. Acceptance runs use digit streams instead.
    """
    if spec.dimension != 1:
        raise UnsupportedOperation("float engine handles one-dimensional maps")
    x = np.array(x0, dtype=float, ndmin=1)
    scalar = np.ndim(x0) == 0
    if np.any((x < 0) | (x >= 1)) or not np.all(np.isfinite(x)):
        raise DomainError("x0 outside [0, 1)")
    rng = np.random.default_rng(seed) if dither else None
    out = np.empty((n, len(x)))
    if spec.kind == INTERMITTENT:
        a = spec.alpha

        def f(v):
            return np.where(v < 0.5, v * (1 + (2 * v) ** a), 2 * v - 1)
    else:
        brs = spec.affine_branches()
        edges = np.array([float(b.lo) for b in brs[1:]])
        sl = np.array([float(b.slope) for b in brs])
        of = np.array([float(b.offset) for b in brs])

        def f(v):
            k = np.searchsorted(edges, v, side="right")
            return np.mod(sl[k] * v + of[k], 1.0)
    for i in range(n):
        x = f(x)
        if rng is not None:
            x = np.mod(x + rng.uniform(-2.0**-52, 2.0**-52, size=x.shape), 1.0)
        out[i] = x
    return out[:, 0] if scalar else out


# ---------------------------------------------------------------------------
# interval images


def image(spec: SystemSpec, s: IntervalUnion, cap: int = INTERVAL_CAP) -> IntervalUnion:
    """Exact image of an interval union on the circle."""
    parts = []
    for br in spec.affine_branches():
        piece = s.intersection(IntervalUnion([(br.lo, br.hi)]))
        for a, b in piece:
            lo, hi = br(a), br(b)
            if hi < lo:
                lo, hi = hi, lo
            parts.append(IntervalUnion([(lo, hi)]).mod1())
    out = union_all(parts, closed=s.closed)
    if len(out) > cap:
        raise IntervalCapError(f"image has {len(out)} components (cap {cap})", partial=out)
    return out


def preimage(spec: SystemSpec, s: IntervalUnion, cap: int = INTERVAL_CAP) -> IntervalUnion:
    """Exact preimage of an interval union on the circle."""
    pairs = []
    for br in spec.affine_branches():
        ylo, yhi = br(br.lo), br(br.hi)
        if yhi < ylo:
            ylo, yhi = yhi, ylo
        for m in range(math.floor(ylo), math.ceil(yhi)):
            shifted = s.translate(m).intersection(IntervalUnion([(ylo, yhi)]))
            for a, b in shifted:
                xa, xb = (a - br.offset) / br.slope, (b - br.offset) / br.slope
                if xb < xa:
                    xa, xb = xb, xa
                pairs.append((max(xa, br.lo), min(xb, br.hi)))
        if len(pairs) > cap:
            raise IntervalCapError("preimage component cap exceeded", partial=IntervalUnion(pairs))
    out = IntervalUnion(pairs, closed=s.closed)
    if len(out) > cap:
        raise IntervalCapError(f"preimage has {len(out)} components (cap {cap})", partial=out)
    return out


def min_return_time(spec: SystemSpec, s: IntervalUnion, horizon: int, cap: int = INTERVAL_CAP):
    """Smallest ``r <= horizon`` with ``T^r(s)`` meeting ``s``; ``None`` if none."""
    if s.is_empty():
        raise DomainError("return time of an empty set")
    cur = s
    for r in range(1, horizon + 1):
        try:
            cur = image(spec, cur, cap=cap)
        except IntervalCapError as e:
            raise IntervalCapError(f"interval cap reached at iterate {r}; no return before", partial=r - 1) from e
        if cur.intersects(s):
            return r
    return None


# ---------------------------------------------------------------------------
# periodic points


def _as_exact(z):
    if isinstance(z, PiMultiple):
        return float(z)
    return z


def _same_point(a, b, exact: bool):
    if exact:
        return a == b
    return circle_distance(float(a), float(b)) < 1e-12


def _coord_maps(spec: SystemSpec):
    if spec.kind == DIGIT_SHIFT:
        return [SystemSpec(DIGIT_SHIFT, bases=(b,)) for b in spec.bases]
    return [spec]


def jacobian_at(spec: SystemSpec, zeta, p: int) -> np.ndarray:
    """Derivative of ``T^p`` at a p-periodic point (diagonal for product maps)."""
    zeta = parse_point(zeta)
    maps = _coord_maps(spec)
    if len(zeta) != len(maps):
        raise DomainError("zeta dimension does not match the system")
    diag = []
    for i, (m, z) in enumerate(zip(maps, zeta)):
        z0 = _as_exact(z)
        exact = isinstance(z0, Fraction) and m.kind != INTERMITTENT
        x = z0
        der = 1
        for _ in range(p):
            der = der * m.derivative(x)
            x = m(x)
        if not _same_point(x, z0, exact):
            raise DomainError(
                f"zeta is not {p}-periodic: coordinate {i} iterate T^{p}(zeta) = {x} differs from {z0}")
        diag.append(float(der))
    return np.diag(diag)


def period_of(spec: SystemSpec, zeta, max_period: int = 64):
    """Least period of ``zeta`` (None when none up to ``max_period``)."""
    zeta = parse_point(zeta)
    maps = _coord_maps(spec)
    if any(isinstance(z, PiMultiple) for z in zeta):
        return None
    xs = [_as_exact(z) for z in zeta]
    cur = list(xs)
    for p in range(1, max_period + 1):
        cur = [m(x) for m, x in zip(maps, cur)]
        if all(_same_point(c, x, isinstance(x, Fraction)) for c, x in zip(cur, xs)):
            return p
    return None
