"""Encoding a normalized structure as a pure metric space.

The universe is ``A ⊔ A×ω ⊔ {∞, t}``: base points, one copy of ``A`` per
level ``n``, an overflow point and a tag.  In raw units (diameter 5):

=============================  ===============================
pair                           distance
=============================  ===============================
base x, base y                 d(x, y)
base x, level (y, n)           2 + 2^-(n+1) d(x, y)
base x, ∞                      2
base x, t                      5
(x, n), (y, n)                 2^-n d(x, y)
(x, n), (y, n+1)               2^-(n+1) (1 + P_n(x, y))
(x, n), (y, m), |n-m| > 1      |2^-n - 2^-m|
(x, n), ∞                      2^-n
(x, n), t                      4 + 2^-(n+1)
∞, t                           4
=============================  ===============================

Unit mode divides everything by 6.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from math import lcm
from typing import Optional, Union

import numpy as np

from .numerics import ZERO, PLFunction, format_rational, pow2, to_dyadic
from .structures import (
    FinitePresentation,
    OraclePresentation,
    PointId,
    Signature,
    StructureError,
)

RAW = "raw"
UNIT = "unit"
SCALE_LABEL = {RAW: "1", UNIT: "1/6"}
ENCODED_SORT = "X"
DEFAULT_LEVEL_CAP = 6


class EncodingError(ValueError):
    """The source does not satisfy the encoder's preconditions."""


@dataclass(frozen=True)
class EncodedPoint:
    kind: str  # "base", "level", "inf", "tag"
    index: object = None
    level: Optional[int] = None

    def label(self) -> str:
        if self.kind == "base":
            return f"A:{self.index}"
        if self.kind == "level":
            return f"A{self.level}:{self.index}"
        return "inf" if self.kind == "inf" else "tag"


def Base(i) -> EncodedPoint:
    return EncodedPoint("base", i)


def Level(n: int, i) -> EncodedPoint:
    if n < 0:
        raise ValueError("levels are natural numbers")
    return EncodedPoint("level", i, n)


INFINITY = EncodedPoint("inf")
TAG = EncodedPoint("tag")


def parse_label(label: str) -> EncodedPoint:
    """Inverse of :meth:`EncodedPoint.label` for finite-tier labels."""
    if label == "inf":
        return INFINITY
    if label == "tag":
        return TAG
    head, _, name = label.partition(":")
    if head == "A":
        return Base(name)
    if head.startswith("A") and head[1:].isdigit():
        return Level(int(head[1:]), name)
    raise ValueError(f"not an encoded point label: {label!r}")


class EncodedSpace:
    """Lazy presentation of the encoded space of a normalized source.

    ``source`` is a normalized :class:`FinitePresentation` (exact distances)
    or an :class:`OraclePresentation` of one (distances within ``2**-k``).
    ``level_cap`` only bounds :meth:`points`; distances involving any level
    are computable.
    """

    def __init__(self, source: Union[FinitePresentation, OraclePresentation], level_cap: int = DEFAULT_LEVEL_CAP,
                 scale: str = RAW, enumeration: Optional[list] = None, unary: Optional[list] = None,
                 metadata: Optional[dict] = None):
        if scale not in (RAW, UNIT):
            raise ValueError(f"scale must be {RAW!r} or {UNIT!r}")
        if level_cap < 0:
            raise ValueError("level_cap must be non-negative")
        self.source = source
        self.level_cap = level_cap
        self.scale = scale
        self.exact = isinstance(source, FinitePresentation)
        if enumeration is None:
            if self.exact:
                enumeration = source.metadata.get("enumeration") or list(source.signature.predicates)
            else:
                enumeration = list(source.signature.predicates)
        self.enumeration = list(enumeration)
        if unary is None:
            unary = source.metadata.get("unary", []) if self.exact else []
        self.unary = list(unary)
        self.metadata = dict(metadata or {})
        self.sort = source.signature.sorts[0]
        if self.exact:
            self._names = source.points[self.sort]
            self._m = source.metric[self.sort]
            self._pos = {n: i for i, n in enumerate(self._names)}

    # -- universe ----------------------------------------------------------

    @property
    def base_size(self) -> Optional[int]:
        if self.exact:
            return len(self._names)
        return self.source.sizes[self.sort]

    def base_indices(self) -> list:
        if self.exact:
            return list(self._names)
        size = self.base_size
        if size is None:
            raise EncodingError("cannot materialize a countably infinite source")
        return list(range(size))

    def points(self) -> list:
        base = self.base_indices()
        pts = [Base(i) for i in base]
        for n in range(self.level_cap):
            pts.extend(Level(n, i) for i in base)
        pts.extend([INFINITY, TAG])
        return pts

    def point_at(self, j: int) -> EncodedPoint:
        """Enumerate the whole countable universe: tag, ∞, then base and levels."""
        if j == 0:
            return TAG
        if j == 1:
            return INFINITY
        j -= 2
        size = self.base_size
        if size is not None:
            q, i = divmod(j, size)
            idx = self.base_indices()[i]
        else:
            # Cantor unpairing of j into (q, i)
            w = int(((8 * j + 1) ** 0.5 - 1) // 2)
            while w * (w + 1) // 2 > j:
                w -= 1
            while (w + 1) * (w + 2) // 2 <= j:
                w += 1
            i = j - w * (w + 1) // 2
            q = w - i
            idx = i
        return Base(idx) if q == 0 else Level(q - 1, idx)

    # -- source access -----------------------------------------------------

    def _src_dist(self, a, b, k):
        if a == b:
            return ZERO
        if self.exact:
            return self._m[self._pos[a]][self._pos[b]]
        return self.source.query_distance(PointId(self.sort, a), PointId(self.sort, b), k)

    def _src_pred(self, n, a, b, k):
        if n >= len(self.enumeration):
            return ZERO
        name = self.enumeration[n]
        if self.exact:
            return self.source.predicates[name][(a, b)]
        return self.source.query_predicate(name, (PointId(self.sort, a), PointId(self.sort, b)), k)

    def _check(self, p: EncodedPoint):
        if p.kind in ("inf", "tag"):
            return
        if p.kind not in ("base", "level"):
            raise EncodingError(f"unknown point variant {p.kind!r}")
        if self.exact:
            if p.index not in self._pos:
                raise EncodingError(f"no base point {p.index!r}")
        else:
            size = self.base_size
            if not isinstance(p.index, int) or p.index < 0 or (size is not None and p.index >= size):
                raise EncodingError(f"no base point {p.index!r}")

    # -- metric ------------------------------------------------------------

    def raw_distance(self, p: EncodedPoint, q: EncodedPoint, k: int = 0) -> Fraction:
        """Distance in raw units; exact on finite sources, within ``2**-k`` otherwise."""
        self._check(p)
        self._check(q)
        if p == q:
            return ZERO
        order = {"base": 0, "level": 1, "inf": 2, "tag": 3}
        if (order[p.kind], p.level or 0) > (order[q.kind], q.level or 0):
            p, q = q, p
        if p.kind == "base":
            if q.kind == "base":
                return self._src_dist(p.index, q.index, k)
            if q.kind == "level":
                return 2 + pow2(-q.level - 1) * self._src_dist(p.index, q.index, k)
            return Fraction(2) if q.kind == "inf" else Fraction(5)
        if p.kind == "level":
            n = p.level
            if q.kind == "level":
                m = q.level
                if m == n:
                    return pow2(-n) * self._src_dist(p.index, q.index, k)
                if m == n + 1:
                    return pow2(-n - 1) * (1 + self._src_pred(n, p.index, q.index, k))
                return abs(pow2(-n) - pow2(-m))
            return pow2(-n) if q.kind == "inf" else 4 + pow2(-n - 1)
        return Fraction(4)  # ∞ to t

    def distance(self, p: EncodedPoint, q: EncodedPoint, k: int = 0) -> Fraction:
        """Distance in this space's scale.  On oracle sources the value is a
        dyadic within ``2**-k`` of the truth."""
        if self.scale == RAW:
            return self.raw_distance(p, q, k)
        if self.exact:
            return self.raw_distance(p, q, k) / 6
        return to_dyadic(self.raw_distance(p, q, k + 3) / 6, k + 1)

    # -- materialization ---------------------------------------------------

    def materialize(self) -> FinitePresentation:
        """The finite subspace of base points, levels below ``level_cap``, ∞ and t,
        in the empty signature, with the metadata block attached."""
        if not self.exact:
            raise EncodingError("only finite sources can be materialized exactly")
        pts = self.points()
        labels = [p.label() for p in pts]
        rows = _encoded_matrix(self._m, self._names, self.level_cap,
                               [self.source.predicates[p] for p in self.enumeration])
        if self.scale == UNIT:
            rows = [[v / 6 for v in row] for row in rows]
        meta = {
            "scale": SCALE_LABEL[self.scale],
            "level_cap": self.level_cap,
            "enumeration": list(self.enumeration),
            "unary": list(self.unary),
            "sort": self.sort,
        }
        meta.update(self.metadata)
        return FinitePresentation(Signature.empty(ENCODED_SORT), {ENCODED_SORT: labels}, {ENCODED_SORT: rows}, {},
                                  meta, value_bound=None)

    def as_oracle(self) -> OraclePresentation:
        """The encoded space as an oracle in the empty signature, indexed by :meth:`point_at`."""

        def dist(sort, i, j, k):
            return self.distance(self.point_at(i), self.point_at(j), k)

        def pred(name, idx, k):
            raise StructureError("the encoded space has no predicates")

        return OraclePresentation(Signature.empty(ENCODED_SORT), {ENCODED_SORT: None}, dist, pred)


def _encoded_matrix(m, names, cap: int, tables: list) -> list:
    """Raw distance matrix of the materialized space, block by block, in the
    order base, level 0, ..., level cap-1, ∞, t."""
    a = len(names)
    N = a * (cap + 1) + 2
    rows = [[ZERO] * N for _ in range(N)]
    inf, tag = N - 2, N - 1
    two, four, five = Fraction(2), Fraction(4), Fraction(5)
    w = [pow2(-n) for n in range(cap + 2)]

    def off(n):  # first index of level n; n = -1 is the base
        return a * (n + 1)

    for i in range(a):
        for j in range(a):
            rows[i][j] = m[i][j]
            for n in range(cap):
                v = two + w[n + 1] * m[i][j]
                rows[i][off(n) + j] = rows[off(n) + j][i] = v
                rows[off(n) + i][off(n) + j] = w[n] * m[i][j]
        rows[i][inf] = rows[inf][i] = two
        rows[i][tag] = rows[tag][i] = five
    for n in range(cap):
        for q in range(n + 1, cap):
            if q == n + 1:
                t = tables[n] if n < len(tables) else None
                for i in range(a):
                    for j in range(a):
                        p = t[(names[i], names[j])] if t is not None else ZERO
                        rows[off(n) + i][off(q) + j] = rows[off(q) + j][off(n) + i] = w[n + 1] * (1 + p)
            else:
                v = w[n] - w[q]
                for i in range(a):
                    for j in range(a):
                        rows[off(n) + i][off(q) + j] = rows[off(q) + j][off(n) + i] = v
        for i in range(a):
            rows[off(n) + i][inf] = rows[inf][off(n) + i] = w[n]
            rows[off(n) + i][tag] = rows[tag][off(n) + i] = four + w[n + 1]
    rows[inf][tag] = rows[tag][inf] = four
    return rows


def encoded_distance(X: EncodedSpace, p: EncodedPoint, q: EncodedPoint, k: int = 0) -> Fraction:
    return X.distance(p, q, k)


def rescale(X: EncodedSpace, mode: str) -> EncodedSpace:
    if mode == X.scale:
        return X
    return EncodedSpace(X.source, X.level_cap, mode, X.enumeration, X.unary, X.metadata)


def check_normalized(s: FinitePresentation) -> None:
    """Cheap precondition check before encoding.

    Single sort, binary predicates, ``P_0 = d/2`` at the head of the
    enumeration, and every predicate 1-Lipschitz in each argument separately
    (a necessary condition for 1-Lipschitz under the max metric, and exactly
    what the coupling distances rely on).
    """
    if len(s.signature.sorts) != 1:
        raise EncodingError("source must be single-sorted")
    srt = s.signature.sorts[0]
    names = s.points[srt]
    m = s.metric[srt]
    enum = s.metadata.get("enumeration") or list(s.signature.predicates)
    if not enum:
        raise EncodingError("source has no predicate enumeration")
    for p in enum:
        if p not in s.predicates or len(s.signature.predicates[p].arity) != 2:
            raise EncodingError(f"enumerated predicate {p!r} is missing or not binary")
    head = s.predicates[enum[0]]
    for i, a in enumerate(names):
        for j, b in enumerate(names):
            if head[(a, b)] * 2 != m[i][j]:
                raise EncodingError(f"P_0 = {enum[0]!r} is not half the metric at ({a}, {b})")
    tables = [[[s.predicates[p][(a, b)] for b in names] for a in names] for p in enum]
    den = 1
    for v in (x for rows in tables + [m] for row in rows for x in row):
        den = lcm(den, v.denominator)
    M = np.array([[int(v * den) for v in row] for row in m], dtype=object)
    for p, rows in zip(enum, tables):
        T = np.array([[int(v * den) for v in row] for row in rows], dtype=object)
        # T[i, j] against T[k, j] (first argument) and T[i, k] (second)
        first = np.argwhere(abs(T[:, None, :] - T[None, :, :]) > M[:, :, None])
        if len(first):
            i, k, j = first[0]
            raise EncodingError(f"{p!r} is not 1-Lipschitz in its first argument at "
                                f"({names[i]}, {names[k]}; {names[j]})")
        second = np.argwhere(abs(T[:, :, None] - T[:, None, :]) > M[None, :, :])
        if len(second):
            i, j, k = second[0]
            raise EncodingError(f"{p!r} is not 1-Lipschitz in its second argument at "
                                f"({names[i]}; {names[j]}, {names[k]})")


def encode(s: FinitePresentation, level_cap: int = DEFAULT_LEVEL_CAP, scale: str = RAW,
           validate: bool = True, trace=None) -> EncodedSpace:
    """Encode a normalized structure (the output of ``normalize_pipeline``).

    ``trace`` (a ``PipelineTrace``) is carried in the metadata block so the
    original signature can be recovered and checked downstream.
    """
    if validate:
        check_normalized(s)
    meta = {"trace": trace.to_json()} if trace is not None else None
    return EncodedSpace(s, level_cap, scale, metadata=meta)


# ---------------------------------------------------------------------------
# finitely many sorts: graph-shaped encoding


@dataclass(frozen=True)
class GraphNode:
    kind: str  # "main", "prod", "factor", "I"
    sort: str  # base sort, or product key joined with "×"
    position: int = -1  # factor position inside its product

    def label(self) -> str:
        if self.kind == "factor":
            return f"{self.kind}[{self.sort}#{self.position}]"
        return f"{self.kind}[{self.sort}]"


class GraphEncodedSpace:
    """Encoding of a 1-Lipschitz structure with finitely many sorts.

    Nodes are main copies of each sort, one copy of each product sort
    ``Π a(P)`` with copies of its factors, and one copy of
    ``I = {0} ∪ {2^-s}`` per product.  Edges carry distances in [2, 3],
    other node pairs sit at distance 4, and a tag point sits at a
    node-specific distance in [5, 6).
    """

    def __init__(self, s: FinitePresentation, level_cap: int = DEFAULT_LEVEL_CAP):
        self.source = s
        sig = s.signature
        for p, sym in sig.predicates.items():
            if not sym.arity:
                raise EncodingError(f"nullary predicate {p!r} has no product sort")
            if sym.modulus != PLFunction.identity():
                raise EncodingError(f"predicate {p!r} is not declared 1-Lipschitz")
        self.products = {}
        for p, sym in sig.predicates.items():
            self.products.setdefault(tuple(sym.arity), []).append(p)
        self.nodes = [GraphNode("main", o) for o in sig.sorts]
        for key, preds in self.products.items():
            label = "×".join(key)
            self.nodes.append(GraphNode("prod", label))
            self.nodes.extend(GraphNode("factor", label, i) for i in range(len(key)))
            self.nodes.append(GraphNode("I", label))
        self.i_size = {"×".join(k): max(level_cap, len(v)) for k, v in self.products.items()}
        self.key_of = {"×".join(k): k for k in self.products}
        self.node_index = {node: j for j, node in enumerate(self.nodes)}

    def node_points(self, node: GraphNode) -> list:
        s = self.source
        if node.kind == "main":
            return list(s.points[node.sort])
        key = self.key_of[node.sort]
        if node.kind == "prod":
            return list(product(*(s.points[o] for o in key)))
        if node.kind == "factor":
            return list(s.points[key[node.position]])
        return [ZERO] + [pow2(-j) for j in range(self.i_size[node.sort])]

    def tag_distance(self, node: GraphNode) -> Fraction:
        return 5 + Fraction(self.node_index[node], len(self.nodes) + 1)

    def points(self) -> list:
        pts = [(node, x) for node in self.nodes for x in self.node_points(node)]
        pts.append(("tag", None))
        return pts

    def _internal(self, node, x, y) -> Fraction:
        s = self.source
        if node.kind == "main":
            return s.dist(node.sort, x, y)
        key = self.key_of[node.sort]
        if node.kind == "prod":
            return s.tuple_dist(key, x, y)
        if node.kind == "factor":
            return s.dist(key[node.position], x, y)
        return abs(x - y)

    def _edge(self, a, x, b, y) -> Optional[Fraction]:
        s = self.source
        if a.kind == "main" and b.kind == "factor":
            key = self.key_of[b.sort]
            if key[b.position] == a.sort:
                return 2 + s.dist(a.sort, x, y)
            return None
        if a.kind == "prod" and b.kind == "factor" and a.sort == b.sort:
            key = self.key_of[a.sort]
            o = key[b.position]
            return 2 + s.dist(o, x[b.position], y)
        if a.kind == "prod" and b.kind == "I" and a.sort == b.sort:
            if y == 0:
                return Fraction(2)
            n = (y.denominator).bit_length() - 1
            preds = self.products[self.key_of[a.sort]]
            if n >= len(preds):
                return Fraction(2)
            return 2 + pow2(-n - 1) * s.predicates[preds[n]][tuple(x)]
        return None

    def distance(self, p, q) -> Fraction:
        (a, x), (b, y) = p, q
        if a == "tag" and b == "tag":
            return ZERO
        if a == "tag":
            return self.tag_distance(b)
        if b == "tag":
            return self.tag_distance(a)
        if a == b:
            return self._internal(a, x, y)
        rank = {"main": 0, "prod": 1, "factor": 2, "I": 3}
        if rank[a.kind] > rank[b.kind]:
            (a, x), (b, y) = (b, y), (a, x)
        e = self._edge(a, x, b, y)
        return Fraction(4) if e is None else e

    def materialize(self) -> FinitePresentation:
        pts = self.points()
        labels = []
        for node, x in pts:
            if node == "tag":
                labels.append("tag")
            elif isinstance(x, tuple):
                labels.append(f"{node.label()}:<{','.join(map(str, x))}>")
            else:
                val = format_rational(x) if isinstance(x, Fraction) else x
                labels.append(f"{node.label()}:{val}")
        n = len(pts)
        rows = [[ZERO] * n for _ in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                rows[i][j] = rows[j][i] = self.distance(pts[i], pts[j])
        return FinitePresentation(Signature.empty(ENCODED_SORT), {ENCODED_SORT: labels}, {ENCODED_SORT: rows}, {},
                                  {"construction": "graph", "scale": "1"}, value_bound=None)


def encode_finite_sorts(s: FinitePresentation, level_cap: int = DEFAULT_LEVEL_CAP) -> GraphEncodedSpace:
    return GraphEncodedSpace(s, level_cap)

