"""Exact rationals, dyadic rounding, certified intervals and piecewise-linear
functions on [0, 1].

Every modulus of uniform continuity in the package is a :class:`PLFunction`.
The class is closed under min, max, sums, rational scaling, composition,
truncated subtraction of a constant and clamping, and all of these are exact.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

Rational = Fraction
RationalLike = Union[Fraction, int, str]

ZERO = Fraction(0)
ONE = Fraction(1)


class DomainError(ValueError):
    """Argument outside the domain of a function."""


def as_rational(value: RationalLike) -> Fraction:
    """Coerce ints, Fractions and ``"p/q"`` strings; floats are refused."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        if "/" in text:
            p, q = text.split("/", 1)
            return Fraction(int(p), int(q))
        return Fraction(int(text))
    raise TypeError(f"cannot read {value!r} as an exact rational")


def format_rational(q: Fraction) -> str:
    """Canonical ``"p/q"`` serialization (denominator always written)."""
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"


def tsub(a: Fraction, b: Fraction) -> Fraction:
    """Truncated subtraction ``a ∸ b = max(a - b, 0)``."""
    return a - b if a > b else ZERO


def pow2(n: int) -> Fraction:
    """``2**n`` as an exact rational, negative exponents allowed."""
    return Fraction(1 << n) if n >= 0 else Fraction(1, 1 << -n)


def to_dyadic(q: Fraction, k: int) -> Fraction:
    """Nearest multiple of ``2**-k`` (ties round up); error at most ``2**-(k+1)``."""
    scale = 1 << k
    return Fraction(math.floor(q * scale + Fraction(1, 2)), scale)


def is_dyadic(q: Fraction) -> bool:
    d = q.denominator
    return d & (d - 1) == 0


# ---------------------------------------------------------------------------
# intervals


@dataclass(frozen=True)
class IntervalValue:
    """A real number known to lie in ``[center - radius, center + radius]``."""

    center: Fraction
    radius: Fraction = ZERO

    def __post_init__(self):
        object.__setattr__(self, "center", as_rational(self.center))
        object.__setattr__(self, "radius", as_rational(self.radius))
        if self.radius < 0:
            raise ValueError("negative radius")

    @classmethod
    def exact(cls, value: RationalLike) -> "IntervalValue":
        return cls(as_rational(value), ZERO)

    @classmethod
    def from_bounds(cls, lo: Fraction, hi: Fraction) -> "IntervalValue":
        if hi < lo:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        return cls((lo + hi) / 2, (hi - lo) / 2)

    @property
    def lo(self) -> Fraction:
        return self.center - self.radius

    @property
    def hi(self) -> Fraction:
        return self.center + self.radius

    @property
    def is_exact(self) -> bool:
        return self.radius == 0

    def contains(self, x: RationalLike) -> bool:
        x = as_rational(x)
        return self.lo <= x <= self.hi

    def widen(self, by: Fraction) -> "IntervalValue":
        return IntervalValue(self.center, self.radius + by)

    def intersects(self, other: "IntervalValue") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def intersection(self, other: "IntervalValue") -> "IntervalValue":
        return IntervalValue.from_bounds(max(self.lo, other.lo), min(self.hi, other.hi))

    def __add__(self, other: "IntervalValue") -> "IntervalValue":
        return IntervalValue(self.center + other.center, self.radius + other.radius)

    def __sub__(self, other: "IntervalValue") -> "IntervalValue":
        return IntervalValue(self.center - other.center, self.radius + other.radius)

    def __neg__(self) -> "IntervalValue":
        return IntervalValue(-self.center, self.radius)

    def scale(self, q: Fraction) -> "IntervalValue":
        return IntervalValue(self.center * q, self.radius * abs(q))

    def map_monotone(self, fn) -> "IntervalValue":
        """Image under a non-decreasing function."""
        return IntervalValue.from_bounds(fn(self.lo), fn(self.hi))

    def __abs__(self) -> "IntervalValue":
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return -self
        return IntervalValue.from_bounds(ZERO, max(-self.lo, self.hi))

    def __repr__(self):
        if self.is_exact:
            return f"IntervalValue({self.center})"
        return f"IntervalValue({self.center} ± {self.radius})"


def interval_min(a: IntervalValue, b: IntervalValue) -> IntervalValue:
    return IntervalValue.from_bounds(min(a.lo, b.lo), min(a.hi, b.hi))


def interval_max(a: IntervalValue, b: IntervalValue) -> IntervalValue:
    return IntervalValue.from_bounds(max(a.lo, b.lo), max(a.hi, b.hi))


# ---------------------------------------------------------------------------
# piecewise-linear functions


def _lerp(x0, y0, x1, y1, x):
    return y0 + (y1 - y0) * (x - x0) / (x1 - x0)


@dataclass(frozen=True, eq=False)
class PLFunction:
    """Continuous piecewise-linear function on [0, 1] with rational breakpoints.

    ``points`` is the breakpoint list ``((x0, y0), ..., (xk, yk))`` with
    ``x0 = 0 < x1 < ... < xk = 1``.  Values may leave [0, 1] after ``sum`` or
    ``scale``; :attr:`is_unit_valued` tells whether they did.  Equality is
    functional: two instances are equal iff they agree at every point.
    """

    points: tuple

    def __post_init__(self):
        pts = tuple((as_rational(x), as_rational(y)) for x, y in self.points)
        if len(pts) < 2:
            raise ValueError("a PLFunction needs at least two breakpoints")
        if pts[0][0] != 0 or pts[-1][0] != 1:
            raise ValueError("breakpoints must start at x=0 and end at x=1")
        for (xa, _), (xb, _) in zip(pts, pts[1:]):
            if not xa < xb:
                raise ValueError("breakpoint x-values must be strictly increasing")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_xs", tuple(p[0] for p in pts))

    # -- constructors ------------------------------------------------------

    @classmethod
    def identity(cls) -> "PLFunction":
        return cls(((ZERO, ZERO), (ONE, ONE)))

    @classmethod
    def constant(cls, c: RationalLike) -> "PLFunction":
        c = as_rational(c)
        return cls(((ZERO, c), (ONE, c)))

    @classmethod
    def linear(cls, slope: RationalLike, cap: RationalLike | None = ONE) -> "PLFunction":
        """``min(slope * x, cap)``; with ``cap=None`` no truncation."""
        f = cls.identity().scale(as_rational(slope))
        return f if cap is None else f.min(cls.constant(cap))

    @classmethod
    def from_samples(cls, fn, n: int) -> "PLFunction":
        """Interpolate ``fn`` on the dyadic grid of mesh ``2**-n``."""
        size = 1 << n
        return cls(tuple((Fraction(k, size), as_rational(fn(Fraction(k, size)))) for k in range(size + 1)))

    # -- basic access ------------------------------------------------------

    @property
    def xs(self) -> tuple:
        return self._xs

    @property
    def ys(self) -> tuple:
        return tuple(p[1] for p in self.points)

    @property
    def is_unit_valued(self) -> bool:
        return all(0 <= y <= 1 for _, y in self.points)

    def __call__(self, x: RationalLike) -> Fraction:
        x = as_rational(x)
        if x < 0 or x > 1:
            raise DomainError(f"{x} is outside [0, 1]")
        xs = self._xs
        i = bisect_right(xs, x) - 1
        if i >= len(xs) - 1:
            return self.points[-1][1]
        (x0, y0), (x1, y1) = self.points[i], self.points[i + 1]
        if x == x0:
            return y0
        return _lerp(x0, y0, x1, y1, x)

    def slopes(self) -> list:
        return [(y1 - y0) / (x1 - x0) for (x0, y0), (x1, y1) in zip(self.points, self.points[1:])]

    def lipschitz_constant(self) -> Fraction:
        return max(abs(s) for s in self.slopes())

    def is_nondecreasing(self) -> bool:
        return all(s >= 0 for s in self.slopes())

    def is_concave(self) -> bool:
        s = self.slopes()
        return all(a >= b for a, b in zip(s, s[1:]))

    def max_value(self) -> Fraction:
        return max(self.ys)

    def min_value(self) -> Fraction:
        return min(self.ys)

    def simplify(self) -> "PLFunction":
        """Drop breakpoints that lie on the segment joining their neighbours."""
        pts = list(self.points)
        out = [pts[0]]
        for i in range(1, len(pts) - 1):
            (x0, y0), (x1, y1), (x2, y2) = out[-1], pts[i], pts[i + 1]
            if (y1 - y0) * (x2 - x0) != (y2 - y0) * (x1 - x0):
                out.append(pts[i])
        out.append(pts[-1])
        return PLFunction(tuple(out))

    def __eq__(self, other):
        if not isinstance(other, PLFunction):
            return NotImplemented
        return self.simplify().points == other.simplify().points

    def __hash__(self):
        return hash(self.simplify().points)

    def __repr__(self):
        body = ", ".join(f"({x}, {y})" for x, y in self.points)
        return f"PLFunction([{body}])"

    def __le__(self, other: "PLFunction") -> bool:
        """Pointwise comparison (exact, checked on the union of breakpoints)."""
        xs = sorted(set(self.xs) | set(other.xs))
        return all(self(x) <= other(x) for x in xs)

    # -- algebra -----------------------------------------------------------

    def _on(self, xs: Iterable[Fraction], fn) -> "PLFunction":
        xs = sorted(set(xs))
        return PLFunction(tuple((x, fn(x)) for x in xs))

    def _with_crossings(self, other: "PLFunction") -> list:
        xs = sorted(set(self.xs) | set(other.xs))
        out = [xs[0]]
        for a, b in zip(xs, xs[1:]):
            da = self(a) - other(a)
            db = self(b) - other(b)
            if (da < 0 < db) or (db < 0 < da):
                out.append(a + (b - a) * da / (da - db))
            out.append(b)
        return out

    def _level_crossings(self, level: Fraction) -> list:
        out = [self.points[0][0]]
        for (x0, y0), (x1, y1) in zip(self.points, self.points[1:]):
            if (y0 < level < y1) or (y1 < level < y0):
                out.append(x0 + (x1 - x0) * (level - y0) / (y1 - y0))
            out.append(x1)
        return out

    def min(self, other) -> "PLFunction":
        other = _lift(other)
        return self._on(self._with_crossings(other), lambda x: min(self(x), other(x)))

    def max(self, other) -> "PLFunction":
        other = _lift(other)
        return self._on(self._with_crossings(other), lambda x: max(self(x), other(x)))

    def __add__(self, other) -> "PLFunction":
        other = _lift(other)
        return self._on(set(self.xs) | set(other.xs), lambda x: self(x) + other(x))

    def scale(self, q: RationalLike) -> "PLFunction":
        q = as_rational(q)
        return PLFunction(tuple((x, q * y) for x, y in self.points))

    def tsub(self, c: RationalLike) -> "PLFunction":
        """``max(f - c, 0)``."""
        c = as_rational(c)
        return self._on(self._level_crossings(c), lambda x: tsub(self(x), c))

    def clamp(self) -> "PLFunction":
        """Clip values to [0, 1]."""
        xs = set(self._level_crossings(ZERO)) | set(self._level_crossings(ONE))
        return self._on(xs, lambda x: min(max(self(x), ZERO), ONE))

    def compose(self, inner: "PLFunction") -> "PLFunction":
        """``self ∘ inner``; ``inner`` must map into [0, 1]."""
        inner = _lift(inner)
        if not inner.is_unit_valued:
            raise DomainError("inner function of a composition must map into [0, 1]")
        xs = set(inner.xs)
        for (x0, y0), (x1, y1) in zip(inner.points, inner.points[1:]):
            if y0 == y1:
                continue
            lo, hi = min(y0, y1), max(y0, y1)
            for bx in self.xs:
                if lo < bx < hi:
                    xs.add(x0 + (x1 - x0) * (bx - y0) / (y1 - y0))
        return self._on(xs, lambda x: self(inner(x)))

    # -- serialization -----------------------------------------------------

    def to_json(self) -> list:
        return [[format_rational(x), format_rational(y)] for x, y in self.points]

    @classmethod
    def from_json(cls, data) -> "PLFunction":
        if data == "identity":
            return cls.identity()
        return cls(tuple((as_rational(x), as_rational(y)) for x, y in data))


def _lift(g) -> PLFunction:
    if isinstance(g, PLFunction):
        return g
    return PLFunction.constant(as_rational(g))


COMBINE_KINDS = ("min", "max", "sum", "scale", "compose", "tsub", "clamp")


def pl_eval(f: PLFunction, x: RationalLike) -> Fraction:
    return f(x)


def pl_combine(kind: str, f: PLFunction, g=None) -> PLFunction:
    """Exact pointwise combination of ``f`` with ``g`` (a PLFunction or rational).

    ``kind`` is one of ``min``, ``max``, ``sum``, ``scale`` (``g`` rational),
    ``compose`` (``f ∘ g``), ``tsub`` (``f ∸ g`` for rational ``g``) and
    ``clamp`` (``g`` ignored).
    """
    if kind == "min":
        return f.min(g)
    if kind == "max":
        return f.max(g)
    if kind == "sum":
        return f + g
    if kind == "scale":
        return f.scale(g)
    if kind == "compose":
        return f.compose(g)
    if kind == "tsub":
        return f.tsub(g)
    if kind == "clamp":
        return f.clamp()
    raise ValueError(f"unknown combination {kind!r}; expected one of {COMBINE_KINDS}")


def tail_sum(fs: Sequence[PLFunction], tail_start: int | None = None) -> tuple:
    """Partial sum ``sum_{i < tail_start} 2**-(i+1) fs[i]`` and the tail bound
    ``2**-tail_start``.

    Each ``fs[i]`` maps into [0, 1], so the full series lies pointwise in
    ``[partial, partial + bound]``.
    """
    if tail_start is None:
        tail_start = len(fs)
    if tail_start > len(fs):
        raise ValueError("tail_start exceeds the number of available terms")
    total = PLFunction.constant(0)
    for i in range(tail_start):
        if not fs[i].is_unit_valued:
            raise ValueError(f"term {i} is not [0,1]-valued")
        total = total + fs[i].scale(pow2(-(i + 1)))
    return total, pow2(-tail_start)


def delta_star(delta: PLFunction, top_index: int) -> PLFunction:
    """Modulus of a predicate after it is moved into a disjoint union where its
    deepest input sort sits at index ``top_index``:

        min{ max{ delta(min{2^N x, 1}), 2^(N+1) x }, 1 }
    """
    inner = PLFunction.linear(pow2(top_index))
    return delta.compose(inner).max(PLFunction.identity().scale(pow2(top_index + 1))).clamp()
