"""Metric signatures and structure presentations.

Two tiers of presentation exist.  :class:`FinitePresentation` holds exact
rational tables and is the ground truth for every test.
:class:`OraclePresentation` only answers precision-``k`` queries with
dyadic rationals, which is what a computable presentation of a countable
structure offers.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .numerics import (
    ONE,
    ZERO,
    IntervalValue,
    PLFunction,
    as_rational,
    format_rational,
    pow2,
    to_dyadic,
)


class StructureError(ValueError):
    """Malformed input: missing table entries, unknown names, bad ranges."""


class IncoherentOracleError(RuntimeError):
    """An oracle returned answers at two precisions whose intervals are disjoint."""


@dataclass(frozen=True)
class PredicateSymbol:
    arity: tuple
    modulus: PLFunction

    def __post_init__(self):
        object.__setattr__(self, "arity", tuple(self.arity))


@dataclass(frozen=True, eq=True)
class Signature:
    """Sorts, predicate symbols with arities and syntactic moduli, home sort."""

    sorts: tuple
    predicates: Mapping[str, PredicateSymbol]
    home: str

    __hash__ = None

    def __post_init__(self):
        object.__setattr__(self, "sorts", tuple(self.sorts))
        object.__setattr__(self, "predicates", dict(self.predicates))
        if len(set(self.sorts)) != len(self.sorts):
            raise StructureError("duplicate sort names")
        if self.home not in self.sorts:
            raise StructureError(f"home sort {self.home!r} is not declared")
        for name, sym in self.predicates.items():
            for s in sym.arity:
                if s not in self.sorts:
                    raise StructureError(f"predicate {name!r} uses undeclared sort {s!r}")
            if sym.modulus(0) != 0:
                raise StructureError(f"modulus of {name!r} does not vanish at 0")
            if not sym.modulus.is_unit_valued:
                raise StructureError(f"modulus of {name!r} leaves [0, 1]")

    @classmethod
    def empty(cls, sort: str = "X") -> "Signature":
        return cls((sort,), {}, sort)

    def to_json(self) -> dict:
        return {
            "sorts": list(self.sorts),
            "home": self.home,
            "predicates": {
                name: {"arity": list(sym.arity), "modulus": sym.modulus.to_json()}
                for name, sym in self.predicates.items()
            },
        }

    @classmethod
    def from_json(cls, data: dict) -> "Signature":
        try:
            sorts = tuple(data["sorts"])
            home = data.get("home", sorts[0] if sorts else None)
            preds = {
                name: PredicateSymbol(tuple(entry["arity"]), PLFunction.from_json(entry.get("modulus", "identity")))
                for name, entry in data.get("predicates", {}).items()
            }
        except (KeyError, TypeError, IndexError) as exc:
            raise StructureError(f"malformed signature: {exc}") from exc
        return cls(sorts, preds, home)


@dataclass(frozen=True)
class PointId:
    sort: str
    index: object


class FinitePresentation:
    """A finite structure given by exact rational tables.

    ``points[sort]`` is a tuple of point names, ``metric[sort]`` the full
    distance matrix in that order, ``predicates[P]`` maps argument tuples of
    point names to values.  Values are checked to lie in [0, 1] unless
    ``value_bound`` says otherwise (encoded spaces in raw units reach 5).
    """

    def __init__(self, signature: Signature, points: Mapping, metric: Mapping,
                 predicates: Mapping, metadata: Optional[dict] = None,
                 value_bound: Optional[Fraction] = ONE):
        self.signature = signature
        self.points = {s: tuple(points[s]) for s in signature.sorts}
        self.metadata = dict(metadata or {})
        self.value_bound = value_bound
        self._index = {}
        for s, names in self.points.items():
            if not names:
                raise StructureError(f"sort {s!r} is empty")
            idx = {n: i for i, n in enumerate(names)}
            if len(idx) != len(names):
                raise StructureError(f"duplicate point names in sort {s!r}")
            self._index[s] = idx
        self.metric = {}
        for s in signature.sorts:
            m = metric.get(s)
            n = len(self.points[s])
            if m is None or len(m) != n or any(len(row) != n for row in m):
                raise StructureError(f"metric table for sort {s!r} is missing or has the wrong shape")
            rows = tuple(tuple(as_rational(v) for v in row) for row in m)
            for row in rows:
                for v in row:
                    if v < 0 or (value_bound is not None and v > value_bound):
                        raise StructureError(f"distance {v} in sort {s!r} outside [0, {value_bound}]")
            self.metric[s] = rows
        self.predicates = {}
        for name, sym in signature.predicates.items():
            table = predicates.get(name)
            if table is None:
                raise StructureError(f"no table for predicate {name!r}")
            table = {tuple(k): as_rational(v) for k, v in table.items()}
            for args in product(*(self.points[s] for s in sym.arity)):
                if args not in table:
                    raise StructureError(f"predicate {name!r} has no entry for {args}")
                v = table[args]
                if v < 0 or v > 1:
                    raise StructureError(f"predicate {name!r} value {v} at {args} outside [0, 1]")
            if len(table) != _count(self.points, sym.arity):
                raise StructureError(f"predicate {name!r} has entries outside its domain")
            self.predicates[name] = table

    # -- access --------------------------------------------------------------

    def index(self, sort: str, name) -> int:
        try:
            return self._index[sort][name]
        except KeyError:
            raise StructureError(f"no point {name!r} in sort {sort!r}") from None

    def dist(self, sort: str, a, b) -> Fraction:
        return self.metric[sort][self.index(sort, a)][self.index(sort, b)]

    def pred(self, name: str, args: Sequence) -> Fraction:
        sym = self.signature.predicates[name]
        if len(args) != len(sym.arity):
            raise StructureError(f"{name!r} takes {len(sym.arity)} arguments, got {len(args)}")
        return self.predicates[name][tuple(args)]

    def tuple_dist(self, arity: Sequence[str], xs: Sequence, ys: Sequence) -> Fraction:
        """Max metric on a product of sorts."""
        return max((self.dist(s, a, b) for s, a, b in zip(arity, xs, ys)), default=ZERO)

    def diameter(self, sort: str) -> Fraction:
        return max(max(row) for row in self.metric[sort])

    @property
    def single_sort(self) -> str:
        if len(self.signature.sorts) != 1:
            raise StructureError("structure is not single-sorted")
        return self.signature.sorts[0]

    def __eq__(self, other):
        if not isinstance(other, FinitePresentation):
            return NotImplemented
        return (self.signature == other.signature and self.points == other.points
                and self.metric == other.metric and self.predicates == other.predicates)

    __hash__ = None

    def __repr__(self):
        sizes = ", ".join(f"{s}:{len(p)}" for s, p in self.points.items())
        return f"FinitePresentation(sorts=[{sizes}], predicates={list(self.predicates)})"

    def replace(self, **changes) -> "FinitePresentation":
        kw = dict(signature=self.signature, points=self.points, metric=self.metric,
                  predicates=self.predicates, metadata=self.metadata, value_bound=self.value_bound)
        kw.update(changes)
        return FinitePresentation(**kw)

    def restrict(self, keep: Mapping[str, Iterable]) -> "FinitePresentation":
        """Substructure on the named points (sorts not listed keep everything)."""
        points = {}
        for s in self.signature.sorts:
            wanted = set(keep.get(s, self.points[s]))
            points[s] = tuple(p for p in self.points[s] if p in wanted)
        metric = {
            s: [[self.metric[s][self.index(s, a)][self.index(s, b)] for b in points[s]] for a in points[s]]
            for s in self.signature.sorts
        }
        preds = {}
        for name, sym in self.signature.predicates.items():
            preds[name] = {args: self.predicates[name][args]
                           for args in product(*(points[s] for s in sym.arity))}
        return FinitePresentation(self.signature, points, metric, preds, self.metadata, self.value_bound)

    # -- JSON ----------------------------------------------------------------

    def to_json(self) -> dict:
        metric = {}
        for s, names in self.points.items():
            rows = self.metric[s]
            metric[s] = [[names[i], names[j], format_rational(rows[i][j])]
                         for i in range(len(names)) for j in range(i + 1, len(names))]
        preds = {name: [[*args, format_rational(v)] for args, v in table.items()]
                 for name, table in self.predicates.items()}
        out = {
            "signature": self.signature.to_json(),
            "points": {s: list(p) for s, p in self.points.items()},
            "metric": metric,
            "predicates": preds,
        }
        if self.metadata:
            out["metadata"] = self.metadata
        return out

    @classmethod
    def from_json(cls, data: dict, value_bound: Optional[Fraction] = ONE) -> "FinitePresentation":
        """Read the structure-description format.

        Metric entries may be listed in either orientation; the diagonal is
        implicitly zero.  Any off-diagonal pair listed in neither orientation is
        an input error.
        """
        try:
            signature = Signature.from_json(data["signature"])
            points = {s: tuple(data["points"][s]) for s in signature.sorts}
            raw_metric = data.get("metric", {})
            raw_preds = data.get("predicates", {})
        except (KeyError, TypeError) as exc:
            raise StructureError(f"malformed structure description: missing {exc}") from exc
        metric = {}
        for s, names in points.items():
            idx = {n: i for i, n in enumerate(names)}
            n = len(names)
            rows = [[ZERO if i == j else None for j in range(n)] for i in range(n)]
            for entry in raw_metric.get(s, []):
                if len(entry) != 3:
                    raise StructureError(f"metric entry {entry!r} in sort {s!r} must be [a, b, value]")
                a, b, v = entry
                if a not in idx or b not in idx:
                    raise StructureError(f"metric entry {entry!r} names an unknown point of sort {s!r}")
                v = as_rational(v)
                i, j = idx[a], idx[b]
                for (p, q) in ((i, j), (j, i)):
                    if rows[p][q] is not None and rows[p][q] != v and p != q:
                        raise StructureError(f"conflicting metric entries for ({a}, {b}) in sort {s!r}")
                    rows[p][q] = v
            for i in range(n):
                for j in range(n):
                    if rows[i][j] is None:
                        raise StructureError(f"missing metric entry ({names[i]}, {names[j]}) in sort {s!r}")
            metric[s] = rows
        preds = {}
        for name, sym in signature.predicates.items():
            table = {}
            for entry in raw_preds.get(name, []):
                if len(entry) != len(sym.arity) + 1:
                    raise StructureError(f"predicate entry {entry!r} does not match arity of {name!r}")
                table[tuple(entry[:-1])] = as_rational(entry[-1])
            preds[name] = table
        return cls(signature, points, metric, preds, data.get("metadata"), value_bound)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, ensure_ascii=False)


def _count(points, arity) -> int:
    n = 1
    for s in arity:
        n *= len(points[s])
    return n


# ---------------------------------------------------------------------------
# validation


@dataclass
class Violation:
    kind: str  # "identity", "symmetry", "triangle", "modulus"
    where: str
    witness: tuple
    detail: str = ""


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def of_kind(self, kind: str) -> list:
        return [v for v in self.violations if v.kind == kind]


def validate_structure(s: FinitePresentation, check_moduli: bool = True) -> ValidationReport:
    """Every metric-axiom and declared-modulus violation of a finite structure.

    Triangle violations are reported as ordered triples ``(p, q, r)`` with
    ``d(p, r) > d(p, q) + d(q, r)``; modulus violations as tuple pairs.
    """
    report = ValidationReport()
    for sort, names in s.points.items():
        m = s.metric[sort]
        n = len(names)
        for i in range(n):
            for j in range(n):
                if i != j and m[i][j] == 0:
                    report.violations.append(Violation("identity", sort, (names[i], names[j])))
                if m[i][j] != m[j][i]:
                    report.violations.append(Violation("symmetry", sort, (names[i], names[j])))
        for i, j, k in _triangle_violations(m):
            report.violations.append(Violation("triangle", sort, (names[i], names[j], names[k]),
                                               f"{m[i][k]} > {m[i][j]} + {m[j][k]}"))
    if check_moduli:
        for name, sym in s.signature.predicates.items():
            table = s.predicates[name]
            keys = list(table)
            for a in range(len(keys)):
                for b in range(a + 1, len(keys)):
                    x, y = keys[a], keys[b]
                    gap = abs(table[x] - table[y])
                    if gap == 0:
                        continue
                    bound = sym.modulus(s.tuple_dist(sym.arity, x, y))
                    if gap > bound:
                        report.violations.append(Violation("modulus", name, (x, y), f"{gap} > {bound}"))
    return report


def _triangle_violations(m) -> list:
    from .verifier import triangle_violation_indices
    return triangle_violation_indices(m)


# ---------------------------------------------------------------------------
# oracle tier


class OraclePresentation:
    """A presentation answering precision-``k`` queries.

    ``dist_query(sort, i, j, k)`` and ``pred_query(name, args, k)`` must return
    dyadic rationals within ``2**-k`` of the true values.  Each answer is
    remembered as an interval; a later answer whose interval misses the
    accumulated one raises :class:`IncoherentOracleError`.  ``sizes`` gives the
    number of indices per sort (``None`` for countably infinite sorts).
    """

    def __init__(self, signature: Signature, sizes: Mapping[str, Optional[int]],
                 dist_query: Callable, pred_query: Callable):
        self.signature = signature
        self.sizes = dict(sizes)
        self._dist = dist_query
        self._pred = pred_query
        self._seen: dict = {}
        self._lock = threading.Lock()

    def _check_index(self, sort: str, i) -> None:
        if sort not in self.sizes:
            raise StructureError(f"unknown sort {sort!r}")
        size = self.sizes[sort]
        if not isinstance(i, int) or i < 0 or (size is not None and i >= size):
            raise StructureError(f"index {i!r} outside sort {sort!r}")

    def _record(self, key, value: Fraction, k: int) -> Fraction:
        iv = IntervalValue(value, pow2(-k))
        with self._lock:
            prev = self._seen.get(key)
            if prev is not None:
                if not prev.intersects(iv):
                    raise IncoherentOracleError(f"answers for {key} at different precisions disagree")
                iv = prev.intersection(iv)
            self._seen[key] = iv
        return value

    def query_distance(self, p: PointId, q: PointId, k: int) -> Fraction:
        if p.sort != q.sort:
            raise StructureError(f"points of different sorts {p.sort!r} and {q.sort!r}")
        self._check_index(p.sort, p.index)
        self._check_index(q.sort, q.index)
        if k < 0:
            raise ValueError("precision must be non-negative")
        if p.index == q.index:
            return ZERO
        i, j = sorted((p.index, q.index))
        v = as_rational(self._dist(p.sort, i, j, k))
        return self._record(("d", p.sort, i, j), v, k)

    def query_predicate(self, name: str, args: Sequence[PointId], k: int) -> Fraction:
        sym = self.signature.predicates.get(name)
        if sym is None:
            raise StructureError(f"unknown predicate {name!r}")
        if len(args) != len(sym.arity):
            raise StructureError(f"{name!r} takes {len(sym.arity)} arguments, got {len(args)}")
        for s, a in zip(sym.arity, args):
            if a.sort != s:
                raise StructureError(f"argument {a} of {name!r} should be in sort {s!r}")
            self._check_index(s, a.index)
        idx = tuple(a.index for a in args)
        v = as_rational(self._pred(name, idx, k))
        return self._record(("P", name, idx), v, k)

    def interval(self, kind: str, *key) -> Optional[IntervalValue]:
        with self._lock:
            return self._seen.get((kind, *key))


def wrap_finite(s: FinitePresentation) -> OraclePresentation:
    """Present a finite structure as an oracle that rounds to dyadics."""

    def dist(sort, i, j, k):
        return to_dyadic(s.metric[sort][i][j], k)

    def pred(name, idx, k):
        arity = s.signature.predicates[name].arity
        args = tuple(s.points[srt][i] for srt, i in zip(arity, idx))
        return to_dyadic(s.predicates[name][args], k)

    return OraclePresentation(s.signature, {srt: len(p) for srt, p in s.points.items()}, dist, pred)


def query_distance(s: OraclePresentation, p: PointId, q: PointId, k: int) -> Fraction:
    return s.query_distance(p, q, k)


def query_predicate(s: OraclePresentation, name: str, args: Sequence[PointId], k: int) -> Fraction:
    return s.query_predicate(name, args, k)


def load_structure(path, value_bound: Optional[Fraction] = ONE) -> FinitePresentation:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise StructureError(f"{path}: not valid JSON ({exc})") from exc
    return FinitePresentation.from_json(data, value_bound)
