"""Recovering a normalized structure from its encoded metric space.

Everything is read off distances: the tag is the one point whose distance
profile avoids [1, 3]; the distance to the tag sorts the remaining points
into base, levels and the overflow point; level ``n`` is matched to the base
by distance exactly 2; and the coupling distances between consecutive levels
give back the predicates.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Optional, Union

from .encoder import EncodedSpace, parse_label
from .numerics import ONE, ZERO, PLFunction, pow2, tsub
from .structures import FinitePresentation, PredicateSymbol, Signature
from .transforms import MERGED_SORT

MAX_PRECISION = 64


class DecodeError(ValueError):
    pass


class NotEncodedError(DecodeError):
    """The space is not an encoded space (no model of the theory)."""


class MalformedSpaceError(DecodeError):
    pass


class InsufficientLevelsError(DecodeError):
    pass


# ---------------------------------------------------------------------------
# raw units


def scale_factor(X: FinitePresentation) -> Fraction:
    """Factor taking ``X``'s distances to raw units (diameter 5)."""
    label = (X.metadata or {}).get("scale")
    if label == "1/6":
        return Fraction(6)
    if label == "1":
        return ONE
    names = X.points[X.single_sort]
    m = X.metric[X.single_sort]
    top = max((v for row in m for v in row), default=ZERO)
    if len(names) > 1 and top <= ONE:
        return Fraction(6)
    return ONE


def raw_matrix(X: FinitePresentation) -> list:
    k = scale_factor(X)
    m = X.metric[X.single_sort]
    if k == 1:
        return [list(row) for row in m]
    return [[k * v for v in row] for row in m]


# ---------------------------------------------------------------------------
# tag and classification


def _levels_near(w: Fraction, r: Fraction) -> Optional[list]:
    """Levels ``n`` with ``|2^-(n+1) - w| <= r``; ``None`` if infinitely many."""
    lo, hi = w - r, w + r
    if hi <= 0 or (r == 0 and w <= 0):
        return []
    if lo <= 0:
        return None
    out = []
    n = 0
    while pow2(-n - 1) >= lo:
        if pow2(-n - 1) <= hi:
            out.append(n)
        n += 1
    return out


def _candidates(v: Fraction, r: Fraction) -> Optional[list]:
    found = [(label,) for label, z in (("tag", ZERO), ("inf", Fraction(4)), ("base", Fraction(5)))
             if abs(v - z) <= r]
    lv = _levels_near(v - 4, r)
    if lv is None:
        return None
    return found + [("level", n) for n in lv]


def classify_distance(v: Fraction, eps: Fraction = ZERO):
    """Class of a point at raw distance ``v`` from the tag, or ``None`` off ``Z``."""
    c = _candidates(v, eps)
    if c is None or len(c) != 1:
        return None
    return c[0]


def _is_space(X) -> bool:
    return isinstance(X, EncodedSpace)


def find_tag(X: Union[FinitePresentation, EncodedSpace], k: int = 0):
    """The unique point whose distances all avoid [1, 3].

    On a :class:`FinitePresentation` the answer is a point index and the
    check is exact.  On an :class:`EncodedSpace` the materialized points are
    scanned with queries at precision ``k`` (raised as needed).
    """
    if _is_space(X):
        pts = X.points()
        hits = [p for p in pts if all(_avoids(X, p, q, k) for q in pts)]
    else:
        D = raw_matrix(X)
        n = len(D)
        hits = [i for i in range(n) if all(D[i][j] < 1 or D[i][j] > 3 for j in range(n))]
    if not hits:
        raise NotEncodedError("not an encoded space: no point avoids distances in [1, 3]")
    if len(hits) > 1:
        raise NotEncodedError(f"not an encoded space: {len(hits)} points avoid distances in [1, 3]")
    return hits[0]


def _raw_query(X: EncodedSpace, p, q, k: int) -> Fraction:
    return X.raw_distance(p, q, k)


def _avoids(X: EncodedSpace, p, q, k: int) -> bool:
    for kk in range(max(k, 2), MAX_PRECISION):
        v = _raw_query(X, p, q, kk)
        r = pow2(-kk)
        if v + r < 1 or v - r > 3:
            return True
        if 1 + r < v < 3 - r:
            return False
    return False


def classify_point(X, t, p, k: int = 0):
    """Class of ``p``: ``("tag",)``, ``("inf",)``, ``("base",)`` or ``("level", n)``.

    On a :class:`FinitePresentation` ``t`` and ``p`` are indices and the
    distance is exact.  On an :class:`EncodedSpace` the distance is queried
    at precision ``k`` and refined until exactly one element of ``Z`` is
    within reach.
    """
    if not _is_space(X):
        D = raw_matrix(X)
        c = classify_distance(D[p][t])
        if c is None:
            raise NotEncodedError(f"not a model of T_L: distance {D[p][t]} to the tag is not in Z")
        return c
    for kk in range(k, MAX_PRECISION):
        v = _raw_query(X, p, t, kk)
        c = _candidates(v, pow2(-kk))
        if c is not None and len(c) == 1:
            return c[0]
        if c == []:
            raise NotEncodedError(f"not a model of T_L: distance ~{v} to the tag is not near Z")
    raise NotEncodedError("classification did not settle within the precision limit")


def classify_all(X: FinitePresentation, t: Optional[int] = None) -> dict:
    """Class of every point, as a dict index -> class."""
    D = raw_matrix(X)
    if t is None:
        t = find_tag(X)
    out = {}
    for i in range(len(D)):
        c = classify_distance(D[i][t])
        if c is None:
            raise NotEncodedError(f"not a model of T_L: point {i} at distance {D[i][t]} from the tag")
        out[i] = c
    return out


def level_bijection(X: FinitePresentation, t: int, n: int, x: int, classes: Optional[dict] = None) -> int:
    """``f_n(x)``: the unique level-``n`` point at distance exactly 2 from base point ``x``."""
    classes = classes if classes is not None else classify_all(X, t)
    return _bijection(raw_matrix(X), classes, n, x)


def _bijection(D, classes: dict, n: int, x: int) -> int:
    if classes[x] != ("base",):
        raise MalformedSpaceError(f"point {x} is not a base point")
    hits = [y for y, c in classes.items() if c == ("level", n) and D[x][y] == 2]
    if len(hits) != 1:
        raise MalformedSpaceError(f"level {n}: base point {x} has {len(hits)} partners at distance 2")
    return hits[0]


def circ_value(X: FinitePresentation, x: int, y: int, n: int, literal: bool = False) -> Fraction:
    """``2 (d(x, y) - 2)^+``, the X-distance from ``y`` to ``f_n(x)``.

    ``literal=True`` uses the factor ``2^(n+1)`` instead, which returns the
    distance in the original structure rather than in level ``n``.
    """
    D = raw_matrix(X)
    factor = pow2(n + 1) if literal else Fraction(2)
    return factor * tsub(D[x][y], Fraction(2))


def recover_predicate(X: FinitePresentation, t: int, n: int, x: int, y: int, literal: bool = False,
                      classes: Optional[dict] = None) -> Fraction:
    """``P_n(x, y) = (2^(n+1) d(f_n x, f_{n+1} y)) - 1`` truncated at 0.

    ``literal=True`` evaluates ``2^(n+1) (d - 1)^+`` instead, which is 0 on
    every valid space.
    """
    classes = classes if classes is not None else classify_all(X, t)
    D = raw_matrix(X)
    a = _bijection(D, classes, n, x)
    b = _bijection(D, classes, n + 1, y)
    d = D[a][b]
    v = pow2(n + 1) * tsub(d, ONE) if literal else tsub(pow2(n + 1) * d, ONE)
    if v > 1:
        raise MalformedSpaceError(f"recovered P_{n} value {v} exceeds 1")
    return v


def eval_set_distance(X: FinitePresentation, t: int, target, p: int, c=5, D: Optional[list] = None):
    """The set-distance formula ``inf_y d(p, y) + c |d(y, t) - r|`` and the true
    distance from ``p`` to the target set.

    ``target`` is ``"A"`` (base points, ``r = 5``) or an integer ``n``
    (level ``n``, ``r = 4 + 2^-(n+1)``).  Returns ``(value, true_distance)``
    in raw units.  Pass ``D = raw_matrix(X)`` to reuse it across calls.
    """
    if D is None:
        D = raw_matrix(X)
    r = Fraction(5) if target == "A" else 4 + pow2(-int(target) - 1)
    value = min(D[p][y] + c * abs(D[y][t] - r) for y in range(len(D)))
    members = [y for y in range(len(D)) if D[y][t] == r]
    true = min((D[p][y] for y in members), default=None)
    return value, true


# ---------------------------------------------------------------------------
# the whole structure


def recover_structure(X: FinitePresentation, enumeration_length: Optional[int] = None) -> FinitePresentation:
    """Decode a materialized encoded space back to the normalized structure.

    The enumeration length comes from the argument, the metadata block or,
    failing both, the number of recoverable levels (``level_cap - 1``).
    """
    meta = X.metadata or {}
    D = raw_matrix(X)
    labels = X.points[X.single_sort]
    t = find_tag(X)
    classes = classify_all(X, t)
    base = [i for i, c in classes.items() if c == ("base",)]
    if not base:
        raise MalformedSpaceError("no base points")
    levels = {}
    for i, c in classes.items():
        if c[0] == "level":
            levels.setdefault(c[1], []).append(i)
    cap = 0
    while cap in levels:
        cap += 1
    if set(levels) != set(range(cap)):
        raise MalformedSpaceError(f"level population has gaps: {sorted(levels)}")
    for n, members in levels.items():
        if len(members) != len(base):
            raise MalformedSpaceError(f"level {n} has {len(members)} points for {len(base)} base points")
    enum = meta.get("enumeration")
    if enumeration_length is None:
        enumeration_length = len(enum) if enum is not None else max(cap - 1, 0)
    if enumeration_length + 1 > cap:
        raise InsufficientLevelsError(
            f"insufficient levels: {enumeration_length} predicates need {enumeration_length + 1} levels, "
            f"the space has {cap}")
    by_level = {n: [y for y in levels[n]] for n in levels}
    f = {n: {x: _match(D, by_level[n], n, x) for x in base} for n in range(enumeration_length + 1)}
    for n, fn in f.items():
        if len(set(fn.values())) != len(base):
            raise MalformedSpaceError(f"level {n} matching is not a bijection")
    names = [_base_name(labels[i], i) for i in base]
    P = []
    for n in range(enumeration_length):
        table = {}
        for i, x in enumerate(base):
            for j, y in enumerate(base):
                v = tsub(pow2(n + 1) * D[f[n][x]][f[n + 1][y]], ONE)
                if v > 1:
                    raise MalformedSpaceError(f"recovered P_{n}({names[i]}, {names[j]}) = {v} exceeds 1")
                table[(names[i], names[j])] = v
        P.append(table)
    metric = [[ZERO] * len(base) for _ in base]
    for i, x in enumerate(base):
        for j, y in enumerate(base):
            if P:
                metric[i][j] = 2 * P[0][(names[i], names[j])]
                if metric[i][j] != D[x][y]:
                    raise MalformedSpaceError(f"2 P_0 disagrees with the base metric at ({names[i]}, {names[j]})")
            else:
                metric[i][j] = D[x][y]
    pnames = list(enum) if enum is not None and len(enum) == enumeration_length else \
        [f"P{n}" for n in range(enumeration_length)]
    srt = meta.get("sort", MERGED_SORT)
    sig = Signature((srt,), {p: PredicateSymbol((srt, srt), PLFunction.identity()) for p in pnames}, srt)
    out_meta = {"enumeration": pnames, "unary": list(meta.get("unary", []))}
    return FinitePresentation(sig, {srt: names}, {srt: metric}, {p: P[n] for n, p in enumerate(pnames)}, out_meta)


def _match(D, members, n: int, x: int) -> int:
    hits = [y for y in members if D[x][y] == 2]
    if len(hits) != 1:
        raise MalformedSpaceError(f"level {n}: base point {x} has {len(hits)} partners at distance 2")
    return hits[0]


def _base_name(label: str, i: int):
    try:
        p = parse_label(label)
    except ValueError:
        return label
    return p.index if p.kind == "base" else label


decode = recover_structure


__all__ = [
    "DecodeError", "InsufficientLevelsError", "MalformedSpaceError", "NotEncodedError",
    "circ_value", "classify_all", "classify_distance", "classify_point", "decode", "eval_set_distance",
    "find_tag", "level_bijection", "raw_matrix", "recover_predicate", "recover_structure", "scale_factor",
]
