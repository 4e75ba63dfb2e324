"""Checking formulas, metric axioms and encoding theories on finite structures.

Real-valued formulas are small dataclass trees evaluated to
:class:`IntervalValue`; on exact structures every interval is a point, so the
machinery only matters for weighted tails and for ``eps`` slack.  Closed
conditions evaluate three-valued: ``"holds"``, ``"fails"`` or ``"unknown"``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Optional, Sequence

import numpy as np

from .numerics import ONE, ZERO, IntervalValue, as_rational, format_rational, interval_max, interval_min, pow2, tsub
from .structures import FinitePresentation

HOLDS, FAILS, UNKNOWN = "holds", "fails", "unknown"

# ---------------------------------------------------------------------------
# triangle inequality

_INT64_SAFE = 1 << 61


def _common_denominator(m) -> Optional[int]:
    den = 1
    for row in m:
        for v in row:
            den = lcm(den, Fraction(v).denominator)
            if den > _INT64_SAFE:
                return None
    return den


def triangle_violation_indices(m) -> list:
    """All ``(i, j, k)`` with ``m[i][k] > m[i][j] + m[j][k]``, in lexicographic order.

    Entries are scaled to a common denominator so the comparison is exact;
    int64 numpy arrays are used when the scaled values fit, Python integers
    otherwise.
    """
    n = len(m)
    if n < 3:
        return []
    den = _common_denominator(m)
    if den is not None:
        top = max(abs(Fraction(v)) for row in m for v in row) * den
        if top * 2 < _INT64_SAFE:
            V = np.array([[int(Fraction(v) * den) for v in row] for row in m], dtype=np.int64)
            return _violations(V)
    V = np.array([[Fraction(v) for v in row] for row in m], dtype=object)
    return _violations(V)


def _violations(V) -> list:
    n = V.shape[0]
    found = []
    for j in range(n):
        bad = V > (V[:, j][:, None] + V[j, :][None, :])
        for i, k in zip(*np.nonzero(bad)):
            i, k = int(i), int(k)
            if i != j and k != j:
                found.append((i, j, k))
    found.sort()
    return found


def check_triangle(space, sort: Optional[str] = None) -> list:
    """Violating triples ``(p, q, r)`` by name, where ``d(p, r) > d(p, q) + d(q, r)``.

    ``space`` is a :class:`FinitePresentation` (one sort is checked) or a pair
    ``(names, matrix)``.  Asymmetric matrices or non-zero diagonals are
    rejected outright.
    """
    if isinstance(space, FinitePresentation):
        sort = sort or space.single_sort
        names, m = space.points[sort], space.metric[sort]
    else:
        names, m = space
    n = len(names)
    for i in range(n):
        if m[i][i] != 0:
            raise ValueError(f"non-zero diagonal at {names[i]!r}")
        for j in range(i + 1, n):
            if m[i][j] != m[j][i]:
                raise ValueError(f"asymmetric matrix at ({names[i]!r}, {names[j]!r})")
    return [(names[i], names[j], names[k]) for i, j, k in triangle_violation_indices(m)]


# ---------------------------------------------------------------------------
# formulas


class Term:
    """Real-valued formula."""


@dataclass(frozen=True)
class Dist(Term):
    x: str
    y: str


@dataclass(frozen=True)
class Pred(Term):
    name: str
    args: tuple


@dataclass(frozen=True)
class Const(Term):
    value: Fraction


@dataclass(frozen=True)
class Add(Term):
    a: Term
    b: Term


@dataclass(frozen=True)
class Sub(Term):
    a: Term
    b: Term


@dataclass(frozen=True)
class TSub(Term):
    a: Term
    b: Term


@dataclass(frozen=True)
class Scale(Term):
    factor: Fraction
    a: Term


@dataclass(frozen=True)
class Min(Term):
    a: Term
    b: Term


@dataclass(frozen=True)
class Max(Term):
    a: Term
    b: Term


@dataclass(frozen=True)
class Abs(Term):
    a: Term


@dataclass(frozen=True)
class Sup(Term):
    var: str
    body: Term
    domain: Optional[str] = None


@dataclass(frozen=True)
class Inf(Term):
    var: str
    body: Term
    domain: Optional[str] = None


@dataclass(frozen=True)
class WeightedSum(Term):
    """``sum_i 2^-(i+1) terms[i]`` plus an unknown tail in ``[0, tail]``."""
    terms: tuple
    tail: Fraction = ZERO


class Formula:
    """Condition or combination of conditions."""


@dataclass(frozen=True)
class Cond(Formula):
    lhs: Term
    op: str  # "<=", ">=", "=", "<", ">"
    rhs: Term


@dataclass(frozen=True)
class And(Formula):
    parts: tuple


@dataclass(frozen=True)
class Or(Formula):
    parts: tuple


@dataclass(frozen=True)
class Not(Formula):
    a: Formula


@dataclass(frozen=True)
class Implies(Formula):
    a: Formula
    b: Formula


@dataclass(frozen=True)
class ForAll(Formula):
    var: str
    body: Formula
    domain: Optional[str] = None


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    body: Formula
    domain: Optional[str] = None


# on a finite structure the strong universal and the weak existential agree
# with the ordinary ones
StrongForAll = ForAll
WeakExists = Exists


@dataclass(frozen=True)
class DistancePredicate(Formula):
    """``φ`` (free in ``var``) is a distance predicate: its zero set ``Z`` is
    non-empty and ``φ(y) = d(y, Z)`` everywhere."""
    var: str
    phi: Term
    domain: Optional[str] = None


@dataclass(frozen=True)
class SingletonPredicate(Formula):
    """``φ`` is the distance to a single point."""
    var: str
    phi: Term
    domain: Optional[str] = None


@dataclass
class Context:
    structure: FinitePresentation
    sets: dict = field(default_factory=dict)  # name -> (sort, [points])
    eps: Fraction = ZERO

    def domain(self, name: Optional[str]):
        s = self.structure
        if name is None:
            srt = s.single_sort
            return srt, s.points[srt]
        if name in self.sets:
            return self.sets[name]
        if name in s.points:
            return name, s.points[name]
        raise KeyError(f"unknown domain {name!r}")


def eval_term(ctx: Context, t: Term, env: dict) -> IntervalValue:
    s = ctx.structure
    if isinstance(t, Dist):
        (sx, x), (sy, y) = env[t.x], env[t.y]
        if sx != sy:
            raise ValueError(f"variables {t.x!r} and {t.y!r} live in different sorts")
        return IntervalValue.exact(s.dist(sx, x, y))
    if isinstance(t, Pred):
        return IntervalValue.exact(s.pred(t.name, [env[v][1] for v in t.args]))
    if isinstance(t, Const):
        return IntervalValue.exact(t.value)
    if isinstance(t, Add):
        return eval_term(ctx, t.a, env) + eval_term(ctx, t.b, env)
    if isinstance(t, Sub):
        return eval_term(ctx, t.a, env) - eval_term(ctx, t.b, env)
    if isinstance(t, TSub):
        d = eval_term(ctx, t.a, env) - eval_term(ctx, t.b, env)
        return d.map_monotone(lambda v: max(v, ZERO))
    if isinstance(t, Scale):
        return eval_term(ctx, t.a, env).scale(as_rational(t.factor))
    if isinstance(t, Min):
        return interval_min(eval_term(ctx, t.a, env), eval_term(ctx, t.b, env))
    if isinstance(t, Max):
        return interval_max(eval_term(ctx, t.a, env), eval_term(ctx, t.b, env))
    if isinstance(t, Abs):
        return abs(eval_term(ctx, t.a, env))
    if isinstance(t, (Sup, Inf)):
        srt, pts = ctx.domain(t.domain)
        if not pts:
            raise ValueError("quantifier over an empty domain")
        pick = interval_max if isinstance(t, Sup) else interval_min
        acc = None
        for p in pts:
            v = eval_term(ctx, t.body, {**env, t.var: (srt, p)})
            acc = v if acc is None else pick(acc, v)
        return acc
    if isinstance(t, WeightedSum):
        acc = IntervalValue.exact(ZERO)
        for i, term in enumerate(t.terms):
            acc = acc + eval_term(ctx, term, env).scale(pow2(-i - 1))
        tail = as_rational(t.tail)
        return acc + IntervalValue(tail / 2, tail / 2)
    raise TypeError(f"not a term: {t!r}")


def eval_formula(s: FinitePresentation, t: Term, assignment: Optional[dict] = None,
                 sets: Optional[dict] = None) -> IntervalValue:
    """Value of a real-valued formula under ``assignment`` (var -> point name,
    or var -> (sort, name))."""
    ctx = Context(s, sets or {})
    return eval_term(ctx, t, _env(s, assignment))


def _env(s: FinitePresentation, assignment: Optional[dict]) -> dict:
    env = {}
    for var, val in (assignment or {}).items():
        env[var] = val if isinstance(val, tuple) and len(val) == 2 and val[0] in s.points else (s.single_sort, val)
    return env


@dataclass(frozen=True)
class Truth:
    status: str
    witness: Optional[dict] = None

    def __bool__(self):
        return self.status == HOLDS


def _compare(lhs: IntervalValue, op: str, rhs: IntervalValue, eps: Fraction) -> str:
    d = lhs - rhs  # conditions are read as  lhs - rhs  (op)  0, with slack eps
    if op in ("<=", "<"):
        strict = op == "<"
        if d.hi < eps or (not strict and d.hi <= eps):
            return HOLDS
        if d.lo > eps or (strict and d.lo >= eps and eps == 0 and d.is_exact):
            return FAILS
        return UNKNOWN
    if op in (">=", ">"):
        return _compare(rhs, "<=" if op == ">=" else "<", lhs, eps)
    if op == "=":
        if -eps <= d.lo and d.hi <= eps:
            return HOLDS
        if d.lo > eps or d.hi < -eps:
            return FAILS
        return UNKNOWN
    raise ValueError(f"unknown comparison {op!r}")


def _combine_and(results):
    unknown = None
    for r in results:
        if r.status == FAILS:
            return r
        if r.status == UNKNOWN and unknown is None:
            unknown = r
    return unknown or Truth(HOLDS)


def eval_truth(ctx: Context, f: Formula, env: dict) -> Truth:
    if isinstance(f, Cond):
        st = _compare(eval_term(ctx, f.lhs, env), f.op, eval_term(ctx, f.rhs, env), ctx.eps)
        return Truth(st, None if st == HOLDS else _named(env))
    if isinstance(f, And):
        return _combine_and(eval_truth(ctx, p, env) for p in f.parts)
    if isinstance(f, Or):
        best = Truth(FAILS, _named(env))
        for p in f.parts:
            r = eval_truth(ctx, p, env)
            if r.status == HOLDS:
                return r
            if r.status == UNKNOWN:
                best = r
        return best
    if isinstance(f, Not):
        r = eval_truth(ctx, f.a, env)
        flip = {HOLDS: FAILS, FAILS: HOLDS, UNKNOWN: UNKNOWN}[r.status]
        return Truth(flip, None if flip == HOLDS else _named(env))
    if isinstance(f, Implies):
        return eval_truth(ctx, Or((Not(f.a), f.b)), env)
    if isinstance(f, ForAll):
        srt, pts = ctx.domain(f.domain)
        return _combine_and(eval_truth(ctx, f.body, {**env, f.var: (srt, p)}) for p in pts)
    if isinstance(f, Exists):
        srt, pts = ctx.domain(f.domain)
        saw_unknown = False
        for p in pts:
            r = eval_truth(ctx, f.body, {**env, f.var: (srt, p)})
            if r.status == HOLDS:
                return r
            saw_unknown = saw_unknown or r.status == UNKNOWN
        return Truth(UNKNOWN if saw_unknown else FAILS, _named(env))
    if isinstance(f, (DistancePredicate, SingletonPredicate)):
        return _distance_predicate_truth(ctx, f, env)
    raise TypeError(f"not a formula: {f!r}")


def _named(env: dict) -> dict:
    return {var: p for var, (_, p) in env.items()}


def _distance_predicate_truth(ctx: Context, f, env: dict) -> Truth:
    srt, pts = ctx.domain(f.domain)
    s = ctx.structure
    vals = {p: eval_term(ctx, f.phi, {**env, f.var: (srt, p)}) for p in pts}
    eps = ctx.eps
    zeros = [p for p in pts if _compare(vals[p], "=", IntervalValue.exact(ZERO), eps) == HOLDS]
    maybe = [p for p in pts if _compare(vals[p], "=", IntervalValue.exact(ZERO), eps) != FAILS]
    if not maybe:
        return Truth(FAILS, {**_named(env), "reason": "empty zero set"})
    if isinstance(f, SingletonPredicate) and len(zeros) > 1:
        return Truth(FAILS, {**_named(env), "reason": "zero set has several points", "zeros": zeros[:2]})
    status = HOLDS if zeros else UNKNOWN
    for y in pts:
        target = min(s.dist(srt, y, z) for z in maybe)
        lo_target = min(s.dist(srt, y, z) for z in zeros) if zeros else target
        st = _compare(vals[y], "=", IntervalValue.from_bounds(target, lo_target), eps)
        if st == FAILS:
            return Truth(FAILS, {**_named(env), f.var: y, "value": format_rational(vals[y].center),
                                 "distance_to_zero_set": format_rational(lo_target)})
        if st == UNKNOWN:
            status = UNKNOWN
    return Truth(status, None if status == HOLDS else _named(env))


def check_closed(s: FinitePresentation, f: Formula, eps=ZERO, assignment: Optional[dict] = None,
                 sets: Optional[dict] = None) -> Truth:
    """Three-valued truth of ``f`` under ``assignment`` with slack ``eps``."""
    ctx = Context(s, sets or {}, as_rational(eps))
    return eval_truth(ctx, f, _env(s, assignment))


def _predicate_values(s: FinitePresentation, phi, sort: Optional[str]):
    sort = sort or s.single_sort
    pts = s.points[sort]
    if callable(phi) and not isinstance(phi, Term):
        return sort, pts, {p: as_rational(phi(p)) for p in pts}
    var = "_y"
    ctx = Context(s)
    vals = {}
    for p in pts:
        v = eval_term(ctx, phi, {var: (sort, p)}) if not isinstance(phi, tuple) else eval_term(
            ctx, phi[1], {phi[0]: (sort, p)})
        if not v.is_exact:
            raise ValueError("distance-predicate checks need exact values")
        vals[p] = v.center
    return sort, pts, vals


def is_distance_predicate(s: FinitePresentation, phi, sort: Optional[str] = None):
    """Decide whether ``phi`` is the distance to its zero set.

    ``phi`` is a callable on point names, or a pair ``(var, term)``.  Returns
    ``(True, zero_set)`` or ``(False, witness)``.
    """
    sort, pts, vals = _predicate_values(s, phi, sort)
    zeros = [p for p in pts if vals[p] == 0]
    if not zeros:
        return False, {"reason": "empty zero set"}
    for y in pts:
        want = min(s.dist(sort, y, z) for z in zeros)
        if vals[y] != want:
            return False, {"point": y, "value": vals[y], "distance_to_zero_set": want}
    return True, zeros


def is_singleton_predicate(s: FinitePresentation, phi, sort: Optional[str] = None):
    """The unique point ``a`` with ``phi = d(., a)``, or ``None``."""
    ok, res = is_distance_predicate(s, phi, sort)
    if ok and len(res) == 1:
        return res[0]
    return None


# ---------------------------------------------------------------------------
# encoding theories


@dataclass
class AxiomResult:
    axiom: str
    status: str
    witness: Optional[dict] = None
    note: str = ""

    def to_json(self) -> dict:
        out = {"axiom": self.axiom, "status": self.status}
        if self.witness is not None:
            out["witness"] = _jsonable(self.witness)
        if self.note:
            out["note"] = self.note
        return out


@dataclass
class AxiomReport:
    theory: str
    results: list = field(default_factory=list)
    discrepancies: list = field(default_factory=list)
    values: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(r.status == HOLDS for r in self.results)

    @property
    def status(self) -> str:
        if self.ok:
            return HOLDS
        return FAILS if any(r.status == FAILS for r in self.results) else UNKNOWN

    def failures(self) -> list:
        return [r for r in self.results if r.status != HOLDS]

    def add(self, axiom: str, truth, note: str = "", discrepancy: bool = False):
        if isinstance(truth, bool):
            truth = Truth(HOLDS if truth else FAILS)
        elif isinstance(truth, str):
            truth = Truth(truth)
        res = AxiomResult(axiom, truth.status, truth.witness, note)
        (self.discrepancies if discrepancy else self.results).append(res)
        return res

    def to_json(self) -> dict:
        return {
            "theory": self.theory,
            "status": self.status,
            "axioms": [r.to_json() for r in self.results],
            "discrepancies": [r.to_json() for r in self.discrepancies],
            "values": _jsonable(self.values),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _jsonable(v):
    if isinstance(v, Fraction):
        return format_rational(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def _first_fail(pairs):
    """``pairs`` yields ``(ok, witness)``; the first failure as a Truth."""
    for ok, witness in pairs:
        if not ok:
            return Truth(FAILS, witness)
    return Truth(HOLDS)


def _close(a: Fraction, b: Fraction, eps: Fraction) -> bool:
    return abs(a - b) <= eps


def check_theory(X: FinitePresentation, theory: str = "TL", eps=ZERO, r=None, c=5) -> AxiomReport:
    """Check ``T_L`` on a materialized encoded space, or ``T_S`` on a merged structure.

    For ``T_L``, ``X`` is a single-sorted space in the empty signature, in raw
    or unit scale (inferred from metadata or from its diameter), and
    level-indexed axioms are checked for every materialized level.  ``c`` is
    the coefficient in the set-distance formulas; coefficient 2 and the
    literal level forms are reported under ``discrepancies``.

    For ``T_S``, ``X`` is an output of ``merge_sorts_cmdu`` (its metadata
    block names the overflow point's predicate, the domains and the original
    moduli).
    """
    theory = theory.upper().replace("_", "")
    if theory == "TS":
        return _check_ts(X, as_rational(eps), r)
    if theory != "TL":
        raise ValueError("theory must be 'TS' or 'TL'")
    return _check_tl(X, as_rational(eps), r, c)


def _check_tl(X: FinitePresentation, eps: Fraction, r, c) -> AxiomReport:
    from . import decoder

    rep = AxiomReport("T_L")
    names = X.points[X.single_sort]
    D = decoder.raw_matrix(X)
    n_pts = len(names)
    V, den = _scaled(D, eps)
    E = int(eps * den)

    tri = triangle_violation_indices(D)
    rep.add("metric.triangle", _first_fail(
        (False, {"p": names[i], "q": names[j], "r": names[k]}) for i, j, k in tri[:1]))
    rep.add("metric.separation", _first_fail(
        (D[i][j] > 0, {"p": names[i], "q": names[j]}) for i in range(n_pts) for j in range(i + 1, n_pts)))

    # the tag: every distance to it is < 1 or > 3 (in fact 0 or >= 4)
    tags = [i for i in range(n_pts) if all(D[i][j] < 1 or D[i][j] > 3 for j in range(n_pts))]
    rep.add("tag.exists", Truth(HOLDS) if tags else Truth(FAILS, {"reason": "no point avoids [1, 3]"}))
    if len(tags) != 1:
        if len(tags) > 1:
            rep.add("tag.unique", Truth(FAILS, {"tags": [names[i] for i in tags[:2]]}))
        return rep
    t = tags[0]
    rep.add("tag.unique", True)

    cls = {}
    bad = None
    for i in range(n_pts):
        kind = decoder.classify_distance(D[i][t], eps)
        if kind is None and bad is None:
            bad = {"point": names[i], "distance_to_tag": D[i][t]}
        cls[i] = kind
    rep.add("zeroset", Truth(FAILS, bad) if bad else Truth(HOLDS))
    if bad:
        return rep
    A = [i for i in range(n_pts) if cls[i] == ("base",)]
    inf = [i for i in range(n_pts) if cls[i] == ("inf",)]
    levels = {}
    for i in range(n_pts):
        if cls[i][0] == "level":
            levels.setdefault(cls[i][1], []).append(i)
    cap = 0
    while cap in levels:
        cap += 1
    rep.values["level_cap"] = cap
    rep.add("zeroset.attained", _first_fail([
        (bool(A), {"missing": "distance 5"}),
        (len(inf) == 1, {"distance 4 count": len(inf)}),
        (set(levels) == set(range(cap)), {"levels": sorted(levels)}),
    ]), note=f"checked to level_cap = {cap}")

    sets = {"A": A, **{f"A{n}": levels[n] for n in range(cap)}}
    for cc, disc in ((c, False), (2, True)):
        if disc and cc == c:
            continue
        for label, members in sets.items():
            ok, w = _dagger_check(V, den, D, t, members, label, cc, E, names)
            rep.add(f"dagger[{label}, c={cc}]", ok if ok is True else Truth(FAILS, w), discrepancy=disc)

    # distances to the overflow point and between far levels are forced by
    # completeness in the infinite model; on a truncation they are checked
    if inf:
        w = inf[0]
        rep.add("infinity", _first_fail(
            [(_close(D[i][w], Fraction(2), eps), {"point": names[i]}) for i in A]
            + [(_close(D[i][w], pow2(-n), eps), {"point": names[i]}) for n in levels for i in levels[n]]))
    rep.add("levels.far", _first_fail(
        (_close(D[i][j], abs(pow2(-n) - pow2(-m)), eps), {"p": names[i], "q": names[j]})
        for n in levels for m in levels if m > n + 1 for i in levels[n] for j in levels[m]))

    f = {}
    for n in range(cap):
        res, fn = _bijection_check(D, A, levels[n], n, eps, names)
        rep.add(f"bijection[{n}]", res)
        if fn is None:
            return rep
        f[n] = fn
        rep.add(f"bijection[{n}].literal", _first_fail(
            (_close(D[fn[x]][z], pow2(n + 1) * tsub(D[x][z], 2), eps), {"x": names[x], "z": names[z]})
            for x in A for z in levels[n]), discrepancy=True)
        rep.add(f"base_level[{n}]", _first_fail(
            (_close(D[x][fn[y]], 2 + pow2(-n - 1) * D[x][y], eps), {"x": names[x], "y": names[y]})
            for x in A for y in A))
        rep.add(f"isometry[{n}]", _first_fail(
            (_close(D[fn[x]][fn[y]], pow2(-n) * D[x][y], eps), {"x": names[x], "y": names[y]})
            for x in A for y in A))
        for literal in (False, True):
            rep.add(f"isometry_scaled[{n}]" + (".literal" if literal else ""),
                    _isometry_scaled(V, den, A, levels[n], n, E, names, literal), discrepancy=literal)

    P = {}
    for n in range(cap - 1):
        lo, hi = pow2(-n - 1), pow2(-n)
        rep.add(f"coupling[{n}]", _first_fail(
            (lo - eps <= D[i][j] <= hi + eps, {"p": names[i], "q": names[j]})
            for i in levels[n] for j in levels[n + 1]))
        P[n] = {(x, y): tsub(pow2(n + 1) * D[f[n][x]][f[n + 1][y]], ONE) for x in A for y in A}
    Pv = {n: np.maximum((1 << (n + 1)) * V[np.ix_([f[n][x] for x in A], [f[n + 1][y] for y in A])] - den, 0)
          for n in P}
    for n in P:
        rep.add(f"modulus[{n}]", _modulus_check(Pv[n], Pv[0], E, [names[x] for x in A]))
    if 0 in P:
        rep.add("P0.half_metric", _first_fail(
            (_close(2 * P[0][(x, y)], D[x][y], eps), {"x": names[x], "y": names[y]}) for x in A for y in A))
    meta = X.metadata or {}
    enum = meta.get("enumeration")
    unary = set(meta.get("unary", []))
    if enum is not None:
        for n in P:
            if n >= len(enum):
                rep.add(f"padding[{n}]", _first_fail(
                    (P[n][(x, y)] <= eps, {"x": names[x], "y": names[y]}) for x in A for y in A))
            elif enum[n] in unary:
                rep.add(f"unary[{n}]", _first_fail(
                    (_close(P[n][(x, y)], P[n][(x, A[0])], eps), {"x": names[x], "y": names[y]})
                    for x in A for y in A))
    trace = meta.get("trace")
    if trace is not None and enum is not None:
        if cap - 1 >= len(enum):
            rep.add("signature.image", _image_check(X, trace),
                    note="the decoded structure is the normalization of a valid structure in the source signature")
        else:
            rep.values["signature.image"] = f"not checked: needs level_cap >= {len(enum) + 1}"
    _add_xi(rep, max((D[i][j] for i in A for j in A), default=ZERO), r)
    return rep


def _image_check(X: FinitePresentation, trace_json) -> Truth:
    from .decoder import DecodeError, recover_structure
    from .structures import StructureError, validate_structure
    from .transforms import PipelineTrace, invert_pipeline, normalize_pipeline

    trace = PipelineTrace.from_json(trace_json)
    try:
        B = recover_structure(X)
        orig = invert_pipeline(B, trace)
    except (DecodeError, StructureError, KeyError) as e:
        return Truth(FAILS, {"reason": str(e)})
    report = validate_structure(orig)
    if not report.ok:
        v = report.violations[0]
        return Truth(FAILS, {"violation": v.kind, "where": v.where, "witness": v.witness, "detail": v.detail})
    grid = next((t.data["grid_level"] for t in trace.stages if t.stage == "lipschitzify"), None)
    again, _ = normalize_pipeline(orig, **({} if grid is None else {"grid_level": grid}))
    if again == B:
        return Truth(HOLDS)
    for p in B.signature.predicates:
        for key, v in B.predicates[p].items():
            if again.predicates.get(p, {}).get(key) != v:
                return Truth(FAILS, {"predicate": p, "args": list(key), "value": v,
                                     "expected": again.predicates.get(p, {}).get(key)})
    return Truth(FAILS, {"reason": "renormalized structure differs"})


def _check_ts(s: FinitePresentation, eps: Fraction, r) -> AxiomReport:
    from .numerics import PLFunction

    rep = AxiomReport("T_S")
    meta = (s.metadata or {}).get("merge")
    if meta is None:
        raise ValueError("T_S needs a merged structure (metadata block 'merge' is missing)")
    srt = s.single_sort
    names = s.points[srt]
    m = s.metric[srt]
    N = len(names)
    q = meta["star_predicate"]
    n_sorts = meta["sorts"]
    Q = {u: s.predicates[q][(u,)] for u in names}

    tri = triangle_violation_indices(m)
    rep.add("metric.triangle", _first_fail(
        (False, {"p": names[i], "q": names[j], "r": names[k]}) for i, j, k in tri[:1]))
    ok, res = is_distance_predicate(s, lambda u: Q[u], srt)
    if ok and len(res) == 1:
        rep.add("overflow.singleton", True)
        star = res[0]
    else:
        rep.add("overflow.singleton", Truth(FAILS, res if not ok else {"zeros": res[:2]}))
        return rep
    allowed = {ZERO} | {pow2(-n) for n in range(n_sorts)}
    rep.add("zeroset", _first_fail(
        (min(abs(Q[u] - z) for z in allowed) <= eps, {"point": u, "distance_to_overflow": Q[u]}) for u in names),
        note=f"Z = {{0}} ∪ {{2^-n : n < {n_sorts}}}")
    level = {u: (None if Q[u] == 0 else Q[u].denominator.bit_length() - 1) for u in names}
    sorts = {n: [u for u in names if level[u] == n] for n in range(n_sorts)}
    pos = {u: i for i, u in enumerate(names)}

    def set_dist(u, n):
        return min((m[pos[u]][pos[v]] for v in sorts[n]), default=None)

    for p, dom in meta["domains"].items():
        table = s.predicates[p]
        mod = PLFunction.from_json(meta["moduli"][p])
        # some argument far from its sort forces the value 1
        rep.add(f"domain[{p}]", _first_fail(
            (not any(set_dist(u, n) > pow2(-n - 2) for u, n in zip(args, dom))
             or _close(v, ONE, eps), {"args": list(args)})
            for args, v in table.items()))
        inside = [a for a in table if all(level[u] == n for u, n in zip(a, dom))]
        rep.add(f"modulus[{p}]", _first_fail(
            (abs(table[a] - table[b]) <= mod(min(ONE, max(
                (pow2(n) * m[pos[x]][pos[y]] for x, y, n in zip(a, b, dom)), default=ZERO))) + eps,
             {"x": list(a), "y": list(b)})
            for a in inside for b in inside))
    home = sorts.get(0, [])
    _add_xi(rep, max((m[pos[a]][pos[b]] for a in home for b in home), default=ZERO), r)
    return rep


def _add_xi(rep: AxiomReport, xi, r):
    if xi is None or xi is False:
        return
    rep.values["Xi"] = xi
    if r is not None:
        r = as_rational(r)
        rep.add("diameter", Truth(HOLDS) if xi >= r else Truth(FAILS, {"Xi": xi, "r": r}))


def _scaled(D, eps: Fraction):
    """``D`` times a common denominator, as an int64 array when that is safe."""
    den = lcm(_common_denominator(D) or 1, eps.denominator) if D else 1
    top = max((abs(v) for row in D for v in row), default=ZERO) * den
    dtype = np.int64 if top < (1 << 40) else object
    return np.array([[int(v * den) for v in row] for row in D], dtype=dtype), den


def _dagger_check(V, den, D, t, members, label, c, E, names):
    """Is ``y -> inf_z d(y, z) + c |d(z, t) - r|``, with ``r`` the tag distance of
    the set, equal to the distance to ``members``?"""
    if not members:
        return False, {"set": label, "reason": "empty"}
    prof = abs(V[:, t] - V[members[0], t])
    cf = Fraction(c)
    if cf.denominator == 1:
        phi = (V + int(cf) * prof[None, :]).min(axis=1)
        true = V[:, members].min(axis=1)
    else:
        phi = (cf.denominator * V + cf.numerator * prof[None, :]).min(axis=1)
        true = cf.denominator * V[:, members].min(axis=1)
        E = E * cf.denominator
    bad = np.nonzero(abs(phi - true) > E)[0]
    if len(bad):
        y = int(bad[0])
        return False, {"set": label, "point": names[y], "formula": min(
            D[y][z] + cf * abs(D[z][t] - D[members[0]][t]) for z in range(len(D))),
            "distance": min(D[y][z] for z in members)}
    return True, None


def _isometry_scaled(V, den, A, An, n, E, names, literal):
    """``|d(x0, x1) - 2^n d(y0, y1)| <= 2^(n+3) [(d(x0, y0) - 2)^+ + (d(x1, y1) - 2)^+]``
    over ``x`` in the base and ``y`` in level ``n``; the literal form has
    ``d(x0, y1)`` in the second term."""
    two = 2 * den
    lhs = abs(V[np.ix_(A, A)][:, :, None, None] - (1 << n) * V[np.ix_(An, An)][None, None, :, :])
    t0 = np.maximum(V[np.ix_(A, An)] - two, 0)  # (x, y)
    first = t0[:, None, :, None]
    second = t0[:, None, None, :] if literal else t0[None, :, None, :]
    rhs = (1 << (n + 3)) * (first + second)
    bad = np.argwhere(lhs > rhs + E)
    if len(bad):
        i, j, k, l = (int(v) for v in bad[0])
        return Truth(FAILS, {"x0": names[A[i]], "x1": names[A[j]], "y0": names[An[k]], "y1": names[An[l]]})
    return Truth(HOLDS)


def _modulus_check(Pn, P0, E, names):
    """``|P_n(x0, x1) - P_n(y0, y1)| <= 2 max(P_0(x0, y0), P_0(x1, y1))``."""
    lhs = abs(Pn[:, :, None, None] - Pn[None, None, :, :])  # (x0, x1, y0, y1)
    rhs = 2 * np.maximum(P0[:, None, :, None], P0[None, :, None, :])
    bad = np.argwhere(lhs > rhs + E)
    if len(bad):
        i, j, k, l = (int(v) for v in bad[0])
        return Truth(FAILS, {"x": (names[i], names[j]), "y": (names[k], names[l])})
    return Truth(HOLDS)


def _bijection_check(D, A, An, n, eps, names):
    """For each ``x`` in ``A`` the unique ``y`` in ``A_n`` at distance 2, with
    ``d(y, z) = 2 (d(x, z) - 2)`` throughout ``A_n``; returns (truth, map)."""
    fn = {}
    for x in A:
        hits = [y for y in An if _close(D[x][y], Fraction(2), eps)]
        if len(hits) != 1:
            return Truth(FAILS, {"x": names[x], "level": n, "matches": len(hits)}), None
        y = hits[0]
        for z in An:
            if not _close(D[y][z], 2 * tsub(D[x][z], 2), eps):
                return Truth(FAILS, {"x": names[x], "y": names[y], "z": names[z]}), None
        fn[x] = y
    if len(set(fn.values())) != len(An):
        return Truth(FAILS, {"level": n, "reason": "not onto"}), None
    return Truth(HOLDS), fn


__all__ = [
    "Abs", "Add", "And", "AxiomReport", "AxiomResult", "Cond", "Const", "Context", "Dist", "DistancePredicate",
    "Exists", "FAILS", "ForAll", "HOLDS", "Implies", "Inf", "Max", "Min", "Not", "Or", "Pred", "Scale",
    "SingletonPredicate", "StrongForAll", "Sub", "Sup", "TSub", "Truth", "UNKNOWN", "WeakExists", "WeightedSum",
    "check_closed", "check_theory", "check_triangle", "eval_formula", "eval_term", "eval_truth",
    "is_distance_predicate", "is_singleton_predicate", "triangle_violation_indices",
]
