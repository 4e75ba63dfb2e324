"""Seeded random finite structures on a rational grid.

Entries are drawn one at a time from the values still consistent with the
entries drawn before (triangle inequality for metrics, the declared modulus
for predicates); an entry with no consistent grid value restarts its table.
Every returned structure passes :func:`validate_structure`.
"""

from __future__ import annotations

import random
from fractions import Fraction
from itertools import product
from math import ceil, floor
from typing import Optional

from .numerics import ONE, ZERO, PLFunction
from .structures import FinitePresentation, PredicateSymbol, Signature, StructureError

DEFAULT_DENOMINATOR = 64
MAX_PRODUCT = 8  # largest product sort a ternary predicate may live on
_RESTARTS = 200


def random_modulus(rng: random.Random) -> PLFunction:
    kind = rng.randrange(4)
    if kind == 0:
        return PLFunction.identity()
    if kind == 1:
        return PLFunction.linear(rng.choice([2, 3, 4]))
    if kind == 2:
        # concave, steep then shallow
        a = Fraction(rng.choice([1, 2, 3]), 8)
        return PLFunction(((ZERO, ZERO), (a, min(ONE, 3 * a)), (ONE, ONE)))
    # not concave: slow start, then a jump
    return PLFunction(((ZERO, ZERO), (Fraction(1, 4), Fraction(1, 8)), (Fraction(1, 2), Fraction(3, 4)),
                       (ONE, ONE)))


def _grid_pick(rng: random.Random, lo: Fraction, hi: Fraction, den: int) -> Optional[Fraction]:
    a, b = ceil(lo * den), floor(hi * den)
    if a > b:
        return None
    return Fraction(rng.randint(a, b), den)


def random_metric(rng: random.Random, n: int, den: int = DEFAULT_DENOMINATOR) -> list:
    """Symmetric ``n x n`` metric with entries in ``[1/den, 1]`` on the ``1/den`` grid."""
    for _ in range(_RESTARTS):
        m = [[ZERO] * n for _ in range(n)]
        ok = True
        for i in range(n):
            for j in range(i + 1, n):
                lo, hi = Fraction(1, den), ONE
                for k in range(j):
                    if k == i:
                        continue
                    # d(i, k) and d(j, k) are both set once k < j and k != i
                    lo = max(lo, abs(m[i][k] - m[j][k]))
                    hi = min(hi, m[i][k] + m[j][k])
                v = _grid_pick(rng, lo, hi, den)
                if v is None:
                    ok = False
                    break
                m[i][j] = m[j][i] = v
            if not ok:
                break
        if ok:
            return m
    raise StructureError("could not sample a metric")


def random_table(rng: random.Random, keys: list, dist, modulus: PLFunction, den: int = DEFAULT_DENOMINATOR) -> dict:
    """Values on ``keys`` respecting ``|P(x) - P(y)| <= modulus(dist(x, y))``."""
    for _ in range(_RESTARTS):
        table = {}
        for x in keys:
            lo, hi = ZERO, ONE
            for y, v in table.items():
                slack = modulus(dist(x, y))
                lo, hi = max(lo, v - slack), min(hi, v + slack)
            pick = _grid_pick(rng, lo, hi, den)
            if pick is None:
                break
            table[x] = pick
        else:
            return table
    c = Fraction(rng.randint(0, den), den)
    return {x: c for x in keys}


def random_structure(rng: random.Random, max_points: int = 6, max_sorts: int = 2, max_preds: int = 3,
                     den: int = DEFAULT_DENOMINATOR, max_arity: int = 3, max_total_points: Optional[int] = None,
                     min_home_points: int = 2) -> FinitePresentation:
    n_sorts = rng.randint(1, max_sorts)
    sorts = tuple(f"O{i}" for i in range(n_sorts))
    sizes = {}
    budget = max_total_points
    for i, o in enumerate(sorts):
        lo = min_home_points if i == 0 else 1
        hi = max_points
        if budget is not None:
            hi = min(hi, budget - (n_sorts - i - 1))
        size = rng.randint(lo, max(lo, hi))
        sizes[o] = size
        if budget is not None:
            budget -= size
    points = {o: [f"{o.lower()}{k}" for k in range(sizes[o])] for o in sorts}
    metric = {o: random_metric(rng, sizes[o], den) for o in sorts}
    s0 = FinitePresentation(Signature(sorts, {}, sorts[0]), points, metric, {})
    preds = {}
    tables = {}
    for p in range(rng.randint(0, max_preds)):
        while True:
            k = rng.randint(0, max_arity)
            arity = tuple(rng.choice(sorts) for _ in range(k))
            size = 1
            for o in arity:
                size *= sizes[o]
            if k < 3 or size <= MAX_PRODUCT:
                break
        mod = random_modulus(rng)
        name = f"R{p}"
        keys = list(product(*(points[o] for o in arity)))
        tables[name] = random_table(rng, keys, lambda x, y, a=arity: s0.tuple_dist(a, x, y), mod, den)
        preds[name] = PredicateSymbol(arity, mod)
    return FinitePresentation(Signature(sorts, preds, sorts[0]), points, metric, tables)


def generate(seed: int, count: int = 1, **kwargs) -> list:
    """``count`` structures from one seeded stream."""
    rng = random.Random(seed)
    return [random_structure(rng, **kwargs) for _ in range(count)]


def two_point_fixture() -> FinitePresentation:
    """Two points at distance 1 in the empty signature."""
    return FinitePresentation(Signature.empty("O"), {"O": ["a", "b"]}, {"O": [[ZERO, ONE], [ONE, ZERO]]}, {})


__all__ = ["generate", "random_metric", "random_modulus", "random_structure", "random_table", "two_point_fixture"]
