"""Normalization pipeline.

An arbitrary finite structure is turned into a single-sorted structure whose
predicates are all binary and 1-Lipschitz, with ``P_0 = d/2`` at the head of
the predicate enumeration.  The stages, in order:

``reduce_arity``  product sorts for predicates of arity >= 3, with projections
``merge_sorts``   countable metric disjoint union of all sorts, overflow point ``*``
``uuc``           rescale predicate ``i`` by ``2**-(i+1)`` so one modulus serves all
``lipschitzify``  ``d -> max(alpha+(d), d)`` with the safeguard predicate ``d/2``
``binarize``      unary predicates become binary; ``P_0 = d/2`` is prepended

Every stage returns a :class:`StageTrace` that, together with the stage
output, determines the stage input exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Optional, Sequence

from .modulus import concave_majorant, monotone_envelope
from .numerics import ONE, ZERO, PLFunction, as_rational, delta_star, format_rational, pow2, tail_sum
from .structures import FinitePresentation, PredicateSymbol, Signature, StructureError, validate_structure

STAGES = ("reduce_arity", "merge_sorts", "uuc", "lipschitzify", "binarize")
STAGE_ALIASES = {
    "arity": "reduce_arity", "arity-reduce": "reduce_arity", "reduce-arity": "reduce_arity",
    "merge": "merge_sorts", "merge-sorts": "merge_sorts",
    "lipschitz": "lipschitzify",
    "enumerate": "binarize", "binarize-and-enumerate": "binarize",
}

DEFAULT_GRID_LEVEL = 8
STAR = "*"
MERGED_SORT = "U"
P0_NAME = "P0"


class DiameterError(StructureError):
    """The home sort is too small for the requested class ``C_{L,r}``."""


@dataclass
class StageTrace:
    stage: str
    input_signature: Signature
    data: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"stage": self.stage, "input_signature": self.input_signature.to_json(), "data": self.data}

    @classmethod
    def from_json(cls, obj: dict) -> "StageTrace":
        return cls(obj["stage"], Signature.from_json(obj["input_signature"]), obj.get("data", {}))


@dataclass
class PipelineTrace:
    stages: list = field(default_factory=list)

    def __add__(self, other: "PipelineTrace") -> "PipelineTrace":
        return PipelineTrace(self.stages + other.stages)

    @property
    def names(self) -> list:
        return [t.stage for t in self.stages]

    def to_json(self) -> list:
        return [t.to_json() for t in self.stages]

    @classmethod
    def from_json(cls, obj) -> "PipelineTrace":
        return cls([StageTrace.from_json(o) for o in obj])


def _fresh(name: str, taken) -> str:
    while name in taken:
        name += "'"
    return name


# ---------------------------------------------------------------------------
# arity reduction


def reduce_arity(s: FinitePresentation):
    """Replace each predicate of arity >= 3 by a unary predicate on a product sort.

    The product sort carries the max metric; for each factor ``i`` a binary
    projection ``pi_i(<x_0..>, y) = d(x_i, y)`` is added.  Products are shared
    between predicates with the same arity string.
    """
    sig = s.signature
    sorts = list(sig.sorts)
    points = dict(s.points)
    metric = dict(s.metric)
    preds = {}
    tables = {}
    products: dict = {}
    point_map: dict = {}
    replaced: dict = {}
    for name, sym in sig.predicates.items():
        if len(sym.arity) <= 2:
            preds[name] = sym
            tables[name] = s.predicates[name]
            continue
        key = tuple(sym.arity)
        if key not in products:
            pname = _fresh("×".join(key), set(sorts))
            products[key] = pname
            sorts.append(pname)
            tuples = list(product(*(s.points[o] for o in key)))
            names = _fresh_tuple_names(tuples)
            points[pname] = tuple(names)
            point_map[pname] = {n: list(t) for n, t in zip(names, tuples)}
            metric[pname] = [[s.tuple_dist(key, a, b) for b in tuples] for a in tuples]
        pname = products[key]
        preds[name] = PredicateSymbol((pname,), sym.modulus)
        inv = {tuple(v): k for k, v in point_map[pname].items()}
        tables[name] = {(inv[args],): v for args, v in s.predicates[name].items()}
        replaced[name] = pname
    projections = {}
    taken = set(preds)
    two_x = PLFunction.linear(2)
    for key, pname in products.items():
        projections[pname] = []
        for i, factor in enumerate(key):
            proj = _fresh(f"pi{i}[{pname}]", taken)
            taken.add(proj)
            projections[pname].append(proj)
            preds[proj] = PredicateSymbol((pname, factor), two_x)
            tables[proj] = {
                (pt, y): s.dist(factor, tup[i], y)
                for pt, tup in point_map[pname].items() for y in s.points[factor]
            }
    new_sig = Signature(tuple(sorts), preds, sig.home)
    out = FinitePresentation(new_sig, points, metric, tables)
    trace = StageTrace("reduce_arity", sig, {
        "products": {pname: list(key) for key, pname in products.items()},
        "points": point_map,
        "replaced": replaced,
        "projections": projections,
    })
    return out, trace


def _fresh_tuple_names(tuples) -> list:
    names = ["<" + ",".join(map(str, t)) + ">" for t in tuples]
    if len(set(names)) == len(names):
        return names
    return [f"<{i}>" for i in range(len(tuples))]


# ---------------------------------------------------------------------------
# countable metric disjoint union


def union_distance(n: Optional[int], dn: Fraction, m: Optional[int]) -> Fraction:
    """Case-list metric of the disjoint union.

    ``n`` and ``m`` are the sort indices of the two points (``None`` for the
    overflow point); ``dn`` is their distance in sort ``n`` when ``n == m``.
    """
    if n is None and m is None:
        return ZERO
    if n is None:
        return pow2(-m)
    if m is None:
        return pow2(-n)
    if n == m:
        return pow2(-n) * dn
    return abs(pow2(-n) - pow2(-m))


def merge_sorts_cmdu(s: FinitePresentation, sort_order: Optional[Sequence[str]] = None):
    """Merge every sort into one, ``U = {*} ⊔ O_0 ⊔ O_1 ⊔ ...`` with ``O_0`` the home sort.

    Predicates are extended by the value 1 off their domain and declared with
    the transformed modulus ``delta_star``; a unary predicate giving the
    distance to ``*`` is appended.
    """
    sig = s.signature
    if sort_order is None:
        sort_order = [sig.home] + [o for o in sig.sorts if o != sig.home]
    sort_order = list(sort_order)
    if sorted(sort_order) != sorted(sig.sorts):
        raise StructureError("sort_order must list every sort exactly once")
    if sort_order[0] != sig.home:
        raise StructureError("the home sort must come first in sort_order")
    level = {o: i for i, o in enumerate(sort_order)}
    names = [STAR]
    where = [(None, None)]
    point_map = {STAR: None}
    for o in sort_order:
        for p in s.points[o]:
            u = f"{o}:{p}"
            names.append(u)
            where.append((o, p))
            point_map[u] = [o, p]
    if len(set(names)) != len(names):
        raise StructureError("point names collide after merging sorts")
    pos = {u: i for i, u in enumerate(names)}

    def d(i, j):
        (o1, p1), (o2, p2) = where[i], where[j]
        n = None if o1 is None else level[o1]
        m = None if o2 is None else level[o2]
        dn = s.dist(o1, p1, p2) if (n is not None and n == m) else ZERO
        return union_distance(n, dn, m)

    N = len(names)
    metric = [[d(i, j) for j in range(N)] for i in range(N)]
    preds = {}
    tables = {}
    domains = {}
    for pname, sym in sig.predicates.items():
        k = len(sym.arity)
        top = max((level[o] for o in sym.arity), default=0)
        mod = delta_star(monotone_envelope(sym.modulus), top)
        preds[pname] = PredicateSymbol((MERGED_SORT,) * k, mod)
        table = {}
        for args in product(names, repeat=k):
            src = [where[pos[a]] for a in args]
            if all(o == want for (o, _), want in zip(src, sym.arity)):
                table[args] = s.predicates[pname][tuple(p for _, p in src)]
            else:
                table[args] = ONE
        tables[pname] = table
        domains[pname] = [level[o] for o in sym.arity]
    q = _fresh("dist_star", set(preds))
    preds[q] = PredicateSymbol((MERGED_SORT,), PLFunction.identity())
    star = pos[STAR]
    tables[q] = {(u,): metric[pos[u]][star] for u in names}
    new_sig = Signature((MERGED_SORT,), preds, MERGED_SORT)
    out = FinitePresentation(new_sig, {MERGED_SORT: names}, {MERGED_SORT: metric}, tables)
    out.metadata["merge"] = {
        "star": STAR,
        "star_predicate": q,
        "sorts": len(sort_order),
        "domains": domains,
        "moduli": {p: sym.modulus.to_json() for p, sym in sig.predicates.items()},
    }
    trace = StageTrace("merge_sorts", sig, {
        "sort_order": sort_order,
        "points": point_map,
        "domains": domains,
        "star_predicate": q,
    })
    return out, trace


# ---------------------------------------------------------------------------
# uniform uniform continuity


def uuc_normalize(s: FinitePresentation):
    """Scale predicate ``i`` (signature order) by ``2**-(i+1)`` and declare every
    predicate with the common modulus ``sum_i 2**-(i+1) Delta_i``."""
    sig = s.signature
    names = list(sig.predicates)
    common, _ = tail_sum([sig.predicates[p].modulus for p in names])
    weights = {p: pow2(-(i + 1)) for i, p in enumerate(names)}
    preds = {p: PredicateSymbol(sig.predicates[p].arity, common) for p in names}
    tables = {p: {a: weights[p] * v for a, v in s.predicates[p].items()} for p in names}
    out = FinitePresentation(Signature(sig.sorts, preds, sig.home), s.points, s.metric, tables)
    trace = StageTrace("uuc", sig, {
        "weights": {p: format_rational(w) for p, w in weights.items()},
        "common_modulus": common.to_json(),
    })
    return out, trace


def common_modulus(sig: Signature) -> PLFunction:
    mods = {sym.modulus for sym in sig.predicates.values()}
    if not mods:
        return PLFunction.constant(0)
    if len(mods) != 1:
        raise StructureError("signature is not u.u.c.: predicates declare different moduli")
    return mods.pop()


def majorant_plus(delta: PLFunction, grid_level: int = DEFAULT_GRID_LEVEL) -> PLFunction:
    """Non-decreasing subadditive ``alpha+ >= alpha >= delta`` with
    ``alpha+(0) = 0`` and ``alpha+ >= identity``.

    The max with the identity can break concavity; subadditivity and
    monotonicity are what keep ``max(alpha+(d), d)`` a metric.

    ``alpha+ = max{ min{alpha_n + gap, S x, 1}, x }`` where ``S`` is the
    largest ratio ``delta(x)/x`` over the breakpoints of ``delta``; ``S x`` is
    itself an affine majorant of ``delta``, so the min keeps ``alpha+ >= alpha``
    while pinning ``alpha+(0) = 0``.
    """
    res = concave_majorant(delta, grid_level)
    ratios = [y / x for x, y in delta.points if x > 0]
    S = max(ratios) if ratios else ZERO
    if S < 0:
        S = ZERO
    capped = res.upper().min(PLFunction.identity().scale(S)).min(PLFunction.constant(ONE))
    return capped.max(PLFunction.identity()).simplify()


def lipschitzify(s: FinitePresentation, grid_level: int = DEFAULT_GRID_LEVEL):
    """Make every predicate 1-Lipschitz by stretching the metric.

    For each sort a safeguard predicate ``half_d[O] = d_O / 2`` is added first,
    so the old metric survives any clipping.  Each metric is then replaced by
    ``max(alpha+(d), d)`` with ``alpha+`` from :func:`majorant_plus` applied to
    the common modulus.
    """
    sig = s.signature
    delta = common_modulus(sig)
    aplus = majorant_plus(delta, grid_level)
    preds = {p: PredicateSymbol(sym.arity, PLFunction.identity()) for p, sym in sig.predicates.items()}
    tables = dict(s.predicates)
    safeguards = {}
    for o in sig.sorts:
        name = _fresh(f"half_d[{o}]", set(preds))
        safeguards[o] = name
        preds[name] = PredicateSymbol((o, o), PLFunction.identity())
        m = s.metric[o]
        names = s.points[o]
        tables[name] = {(names[i], names[j]): m[i][j] / 2 for i in range(len(names)) for j in range(len(names))}
    metric = {}
    for o in sig.sorts:
        metric[o] = [[v if v == 0 else max(aplus(v), v) for v in row] for row in s.metric[o]]
    out = FinitePresentation(Signature(sig.sorts, preds, sig.home), s.points, metric, tables)
    trace = StageTrace("lipschitzify", sig, {
        "grid_level": grid_level,
        "alpha_plus": aplus.to_json(),
        "safeguards": safeguards,
    })
    return out, trace


# ---------------------------------------------------------------------------
# binarization and enumeration


def binarize_and_enumerate(s: FinitePresentation):
    """All predicates binary, enumerated with ``P_0 = d/2`` first.

    Unary ``P`` becomes ``P(x, y) = P(x)``; nullary ones become constants.  The
    enumeration is the signature order; indices past its end stand for the
    constant-zero predicate.
    """
    sig = s.signature
    srt = s.single_sort
    names = s.points[srt]
    m = s.metric[srt]
    p0 = _fresh(P0_NAME, set(sig.predicates))
    preds = {p0: PredicateSymbol((srt, srt), PLFunction.identity())}
    tables = {p0: {(names[i], names[j]): m[i][j] / 2 for i in range(len(names)) for j in range(len(names))}}
    unary, nullary = [], []
    for p, sym in sig.predicates.items():
        k = len(sym.arity)
        if k > 2:
            raise StructureError(f"predicate {p!r} still has arity {k}; run reduce_arity first")
        preds[p] = PredicateSymbol((srt, srt), sym.modulus)
        src = s.predicates[p]
        if k == 2:
            tables[p] = dict(src)
        elif k == 1:
            unary.append(p)
            tables[p] = {(x, y): src[(x,)] for x in names for y in names}
        else:
            nullary.append(p)
            tables[p] = {(x, y): src[()] for x in names for y in names}
    out = FinitePresentation(Signature((srt,), preds, srt), s.points, s.metric, tables)
    enumeration = list(preds)
    out.metadata["enumeration"] = enumeration
    out.metadata["unary"] = unary + nullary
    trace = StageTrace("binarize", sig, {"P0": p0, "unary": unary, "nullary": nullary,
                                         "enumeration": enumeration})
    return out, trace


def enumerated_value(s: FinitePresentation, n: int, x, y) -> Fraction:
    """``P_n(x, y)`` of a normalized structure, zero past the enumeration."""
    enum = s.metadata.get("enumeration") or list(s.signature.predicates)
    if n >= len(enum):
        return ZERO
    return s.predicates[enum[n]][(x, y)]


# ---------------------------------------------------------------------------
# the whole pipeline


def normalize_stage_name(stage: str) -> str:
    stage = STAGE_ALIASES.get(stage, stage)
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}; expected one of {STAGES}")
    return stage


def is_normalized(s: FinitePresentation) -> bool:
    from .encoder import EncodingError, check_normalized
    if not s.metadata.get("enumeration"):
        return False
    if any(sym.modulus != PLFunction.identity() for sym in s.signature.predicates.values()):
        return False
    try:
        check_normalized(s)
    except EncodingError:
        return False
    return validate_structure(s).ok


def normalize_pipeline(s: FinitePresentation, r: Optional[Fraction] = None,
                       grid_level: int = DEFAULT_GRID_LEVEL, stop_after: Optional[str] = None):
    """Run the stages in order, optionally stopping after ``stop_after``.

    With ``r`` given, the home sort must have diameter at least ``r``.  A
    structure that is already normalized (it carries an enumeration, passes the
    encoder's precondition and is 1-Lipschitz) comes back unchanged with an
    empty trace.
    """
    if r is not None:
        r = as_rational(r)
        diam = s.diameter(s.signature.home)
        if diam < r:
            raise DiameterError(f"home sort {s.signature.home!r} has diameter {diam} < r = {r}")
    if stop_after is None and is_normalized(s):
        return s, PipelineTrace()
    last = normalize_stage_name(stop_after) if stop_after else STAGES[-1]
    trace = PipelineTrace()
    cur = s
    for stage in STAGES:
        if stage == "reduce_arity":
            cur, t = reduce_arity(cur)
        elif stage == "merge_sorts":
            cur, t = merge_sorts_cmdu(cur)
        elif stage == "uuc":
            cur, t = uuc_normalize(cur)
        elif stage == "lipschitzify":
            cur, t = lipschitzify(cur, grid_level)
        else:
            cur, t = binarize_and_enumerate(cur)
        trace.stages.append(t)
        if stage == last:
            break
    return cur, trace


# ---------------------------------------------------------------------------
# inversion


def invert_stage(out: FinitePresentation, t: StageTrace) -> FinitePresentation:
    """Recompute the input of one stage from its output and trace."""
    sig = t.input_signature
    data = t.data
    if t.stage == "binarize":
        srt = sig.sorts[0]
        names = out.points[srt]
        tables = {}
        for p, sym in sig.predicates.items():
            src = out.predicates[p]
            k = len(sym.arity)
            if k == 2:
                tables[p] = dict(src)
            elif k == 1:
                tables[p] = {(x,): src[(x, x)] for x in names}
            else:
                tables[p] = {(): src[(names[0], names[0])]}
        return FinitePresentation(sig, out.points, out.metric, tables)
    if t.stage == "lipschitzify":
        metric = {}
        for o in sig.sorts:
            half = out.predicates[data["safeguards"][o]]
            names = out.points[o]
            metric[o] = [[2 * half[(a, b)] for b in names] for a in names]
        tables = {p: dict(out.predicates[p]) for p in sig.predicates}
        return FinitePresentation(sig, out.points, metric, tables)
    if t.stage == "uuc":
        w = {p: as_rational(v) for p, v in data["weights"].items()}
        tables = {p: {a: v / w[p] for a, v in out.predicates[p].items()} for p in sig.predicates}
        return FinitePresentation(sig, out.points, out.metric, tables)
    if t.stage == "merge_sorts":
        order = data["sort_order"]
        level = {o: i for i, o in enumerate(order)}
        back = {tuple(v): u for u, v in data["points"].items() if v is not None}
        points = {o: tuple(p for u, v in data["points"].items() if v is not None and v[0] == o for p in [v[1]])
                  for o in sig.sorts}
        metric = {}
        for o in sig.sorts:
            scale = pow2(level[o])
            metric[o] = [[scale * out.dist(MERGED_SORT, back[(o, a)], back[(o, b)]) for b in points[o]]
                         for a in points[o]]
        tables = {}
        for p, sym in sig.predicates.items():
            tables[p] = {args: out.predicates[p][tuple(back[(o, a)] for o, a in zip(sym.arity, args))]
                         for args in product(*(points[o] for o in sym.arity))}
        return FinitePresentation(sig, points, metric, tables)
    if t.stage == "reduce_arity":
        points = {o: out.points[o] for o in sig.sorts}
        metric = {o: out.metric[o] for o in sig.sorts}
        tables = {}
        for p, sym in sig.predicates.items():
            if p in data["replaced"]:
                pname = data["replaced"][p]
                tables[p] = {tuple(data["points"][pname][pt]): v for (pt,), v in out.predicates[p].items()}
            else:
                tables[p] = dict(out.predicates[p])
        return FinitePresentation(sig, points, metric, tables)
    raise ValueError(f"unknown stage {t.stage!r}")


def invert_pipeline(out: FinitePresentation, trace: PipelineTrace) -> FinitePresentation:
    cur = out
    for t in reversed(trace.stages):
        cur = invert_stage(cur, t)
    return cur
