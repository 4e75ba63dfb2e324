"""Calculus of moduli of uniform continuity.

The central object is the non-decreasing concave majorant ``alpha`` of a
function ``delta`` with ``delta(0) = 0``: the infimum of all affine functions
``m x + b`` (``m, b >= 0``) lying above ``delta``.  ``alpha`` is approximated
from below by ``alpha_n``, which only asks the affine functions to dominate
``delta`` on the grid of mesh ``2**-n``, and

    alpha_n <= alpha <= alpha_n + 2 * Delta_delta(2**-n)

for any non-decreasing modulus ``Delta_delta`` of ``delta``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Optional

from .numerics import ONE, PLFunction, pow2
from .structures import FinitePresentation


@dataclass(frozen=True)
class MajorantResult:
    alpha_n: PLFunction
    n: int
    certified_gap: Fraction
    modulus: PLFunction  # the non-decreasing modulus of delta used for the gap

    def upper(self) -> PLFunction:
        """``alpha_n + certified_gap``, a pointwise upper bound for ``alpha``."""
        return self.alpha_n + PLFunction.constant(self.certified_gap)


def monotone_envelope(f: PLFunction) -> PLFunction:
    """Least non-decreasing function above ``f``: ``x -> max_{y <= x} f(y)``."""
    pts = f.points
    out = [pts[0]]
    best = pts[0][1]
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        if y1 > best:
            if y0 < best:
                # the running max is flat until f climbs back to it
                out.append((x0 + (x1 - x0) * (best - y0) / (y1 - y0), best))
            out.append((x1, y1))
            best = y1
        else:
            out.append((x1, best))
    dedup = [out[0]]
    for p in out[1:]:
        if p[0] != dedup[-1][0]:
            dedup.append(p)
    return PLFunction(tuple(dedup)).simplify()


def lipschitz_modulus(delta: PLFunction) -> PLFunction:
    """A non-decreasing modulus of ``delta``: ``min(L h, osc)`` with ``L`` the
    largest absolute slope and ``osc`` the oscillation of ``delta``."""
    osc = delta.max_value() - delta.min_value()
    return PLFunction.identity().scale(delta.lipschitz_constant()).min(PLFunction.constant(min(osc, ONE)))


def _upper_hull(points):
    hull = []
    for p in points:
        while len(hull) >= 2:
            (ox, oy), (ax, ay) = hull[-2], hull[-1]
            # drop a when it lies on or below the chord from o to p
            if (ax - ox) * (p[1] - oy) - (ay - oy) * (p[0] - ox) >= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


def _nondecreasing_hull(points) -> PLFunction:
    hull = _upper_hull(sorted(points))
    peak = max(range(len(hull)), key=lambda i: (hull[i][1], -i))
    kept = hull[: peak + 1]
    if kept[-1][0] != 1:
        kept.append((ONE, kept[-1][1]))
    return PLFunction(tuple(kept))


def concave_majorant(delta: PLFunction, n: int, modulus: Optional[PLFunction] = None) -> MajorantResult:
    """Grid majorant ``alpha_n`` of ``delta`` with its certified gap.

    ``alpha_n`` is exact: for each ``x`` it equals the minimum of ``m x + b``
    over ``m, b >= 0`` with ``m k 2**-n + b >= delta(k 2**-n)`` for every grid
    index ``k``.  That minimum is the upper concave hull of the grid samples,
    flattened after its peak.  ``modulus`` defaults to
    :func:`lipschitz_modulus`; it is replaced by its monotone envelope before
    the gap ``2 * modulus(2**-n)`` is taken.
    """
    if delta(0) != 0:
        raise ValueError("concave_majorant needs delta(0) = 0")
    if n < 0:
        raise ValueError("grid level must be non-negative")
    size = 1 << n
    samples = [(Fraction(k, size), delta(Fraction(k, size))) for k in range(size + 1)]
    alpha_n = _nondecreasing_hull(samples)
    mod = monotone_envelope(modulus if modulus is not None else lipschitz_modulus(delta))
    return MajorantResult(alpha_n, n, 2 * mod(pow2(-n)), mod)


def exact_concave_majorant(delta: PLFunction) -> PLFunction:
    """The true ``alpha`` of a piecewise-linear ``delta``.

    An affine function dominates a PL function iff it dominates it at the
    breakpoints, so the hull of the breakpoints is exact.
    """
    if delta(0) != 0:
        raise ValueError("exact_concave_majorant needs delta(0) = 0")
    return _nondecreasing_hull(list(delta.points))


def grid_slope_bound(delta: PLFunction, n: int) -> Fraction:
    """``2**n * max_k |delta((k+1) 2**-n) - delta(k 2**-n)|``, an upper bound on
    the slopes an optimal affine majorant on the level-``n`` grid ever needs."""
    size = 1 << n
    vals = [delta(Fraction(k, size)) for k in range(size + 1)]
    return size * max(abs(b - a) for a, b in zip(vals, vals[1:]))


def lipschitz_approx(s: FinitePresentation, predicate: str, n: int) -> dict:
    """``f_n(x) = min_y min{ f(y)/n + d(x, y), 1 }`` on a finite structure.

    The predicate's domain carries the max metric over its argument sorts.
    The result is 1-Lipschitz and satisfies ``n * f_n <= f``.
    """
    if n <= 0:
        raise ValueError("n must be a positive integer")
    sym = s.signature.predicates[predicate]
    table = s.predicates[predicate]
    keys = list(product(*(s.points[srt] for srt in sym.arity)))
    inv = Fraction(1, n)
    out = {}
    for x in keys:
        best = ONE
        for y in keys:
            v = inv * table[y] + s.tuple_dist(sym.arity, x, y)
            if v < best:
                best = v
        out[x] = best
    return out


__all__ = [
    "MajorantResult",
    "concave_majorant",
    "exact_concave_majorant",
    "lipschitz_approx",
    "lipschitz_modulus",
    "monotone_envelope",
    "grid_slope_bound",
]
