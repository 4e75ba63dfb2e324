import json
import random
from fractions import Fraction as F
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metcodec.corpus import generate, random_structure
from metcodec.fixtures import two_point_normalized
from metcodec.modulus import concave_majorant
from metcodec.numerics import PLFunction, delta_star
from metcodec.structures import FinitePresentation, PredicateSymbol, Signature, StructureError, validate_structure
from metcodec.transforms import (
    STAGES,
    DiameterError,
    PipelineTrace,
    binarize_and_enumerate,
    invert_pipeline,
    invert_stage,
    lipschitzify,
    majorant_plus,
    merge_sorts_cmdu,
    normalize_pipeline,
    reduce_arity,
    union_distance,
    uuc_normalize,
)

ident = PLFunction.identity()


def ternary_source():
    pts = ["a", "b"]
    sig = Signature(("O",), {"T": PredicateSymbol(("O", "O", "O"), ident)}, "O")
    table = {t: F(sum(x == "b" for x in t), 4) for t in product(pts, repeat=3)}
    return FinitePresentation(sig, {"O": pts}, {"O": [[0, 1], [1, 0]]}, {"T": table})


def test_reduce_arity_examples():
    out, trace = reduce_arity(ternary_source())
    prod_sort = trace.data["replaced"]["T"]
    assert out.signature.predicates["T"].arity == (prod_sort,)
    assert out.pred("T", ("<a,b,b>",)) == F(2, 4)
    assert out.pred("pi0[" + prod_sort + "]", ("<a,b,b>", "a")) == 0
    assert out.dist(prod_sort, "<a,a,b>", "<a,b,b>") == 1
    assert all(len(sym.arity) <= 2 for sym in out.signature.predicates.values())
    assert validate_structure(out).ok
    assert invert_stage(out, trace) == ternary_source()


def test_union_distance_cases():
    assert union_distance(2, F(1), 2) == F(1, 4)
    assert union_distance(1, F(0), 3) == F(3, 8)
    assert union_distance(0, F(0), None) == 1
    assert union_distance(None, F(0), None) == 0


def two_sorts():
    sig = Signature(("H", "O1"), {"P": PredicateSymbol(("O1", "O1"), ident)}, "H")
    return FinitePresentation(sig, {"H": ["h", "g"], "O1": ["x", "y"]},
                              {"H": [[0, 1], [1, 0]], "O1": [[0, F(1, 2)], [F(1, 2), 0]]},
                              {"P": {("x", "x"): 0, ("x", "y"): F(1, 2), ("y", "x"): F(1, 2), ("y", "y"): 0}})


def test_merge_examples():
    out, trace = merge_sorts_cmdu(two_sorts())
    assert out.pred("P", ("O1:x", "*")) == 1
    assert out.pred("P", ("O1:x", "O1:y")) == F(1, 2)
    assert out.dist("U", "O1:x", "O1:y") == F(1, 4)
    assert out.dist("U", "H:h", "O1:x") == F(1, 2)
    assert out.pred("dist_star", ("O1:y",)) == F(1, 2)
    assert out.signature.predicates["P"].modulus == delta_star(ident, 1)
    assert validate_structure(out).ok
    assert invert_stage(out, trace) == two_sorts()
    with pytest.raises(StructureError):
        merge_sorts_cmdu(two_sorts(), ["O1", "H"])


def test_uuc_examples():
    sig = Signature(("O",), {"A": PredicateSymbol(("O",), ident), "B": PredicateSymbol(("O",), PLFunction.linear(2))},
                    "O")
    s = FinitePresentation(sig, {"O": ["a"]}, {"O": [[0]]}, {"A": {("a",): 1}, "B": {("a",): 1}})
    out, _ = uuc_normalize(s)
    assert out.pred("A", ("a",)) == F(1, 2) and out.pred("B", ("a",)) == F(1, 4)
    want = ident.scale(F(1, 2)) + PLFunction.linear(2).scale(F(1, 4))
    assert out.signature.predicates["A"].modulus == want
    empty = FinitePresentation(Signature.empty("O"), {"O": ["a"]}, {"O": [[0]]}, {})
    assert uuc_normalize(empty)[0] == empty


def single(modulus, d):
    sig = Signature(("O",), {"P": PredicateSymbol(("O",), modulus)}, "O")
    return FinitePresentation(sig, {"O": ["a", "b"]}, {"O": [[0, d], [d, 0]]}, {"P": {("a",): 0, ("b",): 0}})


def test_lipschitzify_clipping():
    out, trace = lipschitzify(single(PLFunction.linear(2), F(3, 4)))
    assert out.dist("O", "a", "b") == 1
    assert out.pred("half_d[O]", ("a", "b")) == F(3, 8)
    assert invert_stage(out, trace).dist("O", "a", "b") == F(3, 4)


def test_lipschitzify_identity_keeps_metric():
    out, _ = lipschitzify(single(ident, F(3, 4)))
    assert out.dist("O", "a", "b") == F(3, 4)
    assert majorant_plus(ident) == ident


@settings(max_examples=40)
@given(st.integers(0, 10_000))
def test_majorant_plus_dominates(seed):
    rng = random.Random(seed)
    s = random_structure(rng, max_preds=3)
    delta, _ = uuc_normalize(merge_sorts_cmdu(reduce_arity(s)[0])[0])
    syms = list(delta.signature.predicates.values())
    mod = syms[0].modulus
    ap = majorant_plus(mod)
    res = concave_majorant(mod, 8)
    assert ap(0) == 0 and ap.is_nondecreasing()
    # subadditive, which is what keeps max(alpha+(d), d) a metric
    grid = sorted(set(ap.xs) | {F(k, 64) for k in range(65)})
    assert all(ap(x + y) <= ap(x) + ap(y) for x in grid for y in grid if x + y <= 1)
    for x in mod.xs + ap.xs:
        assert ap(x) >= mod(x) and ap(x) >= x
        assert ap(x) >= min(res.alpha_n(x), 1)


def test_binarize_examples():
    sig = Signature(("U",), {"E": PredicateSymbol(("U", "U"), ident), "P": PredicateSymbol(("U",), ident)}, "U")
    s = FinitePresentation(sig, {"U": ["a", "b"]}, {"U": [[0, 1], [1, 0]]},
                           {"E": {k: 0 for k in product("ab", repeat=2)}, "P": {("a",): F(1, 3), ("b",): 0}})
    out, trace = binarize_and_enumerate(s)
    assert out.metadata["enumeration"] == ["P0", "E", "P"]
    assert out.metadata["unary"] == ["P"]
    assert out.pred("P0", ("a", "b")) == F(1, 2)
    assert out.pred("P", ("a", "b")) == F(1, 3) == out.pred("P", ("a", "a"))
    assert invert_stage(out, trace) == s


def test_pipeline_two_sorts_with_ternary():
    base = ternary_source()
    sig = Signature(("O", "Q"), {**base.signature.predicates, "R": PredicateSymbol(("Q",), ident)}, "O")
    s = FinitePresentation(sig, {"O": ["a", "b"], "Q": ["c"]}, {"O": base.metric["O"], "Q": [[0]]},
                           {"T": base.predicates["T"], "R": {("c",): F(1, 2)}})
    out, trace = normalize_pipeline(s)
    assert trace.names == list(STAGES)
    names = out.points["U"]
    assert names[0] == "*"
    assert {n.split(":")[0] for n in names[1:]} == {"O", "Q", "O×O×O"}
    assert all(len(sym.arity) == 2 and sym.modulus == ident for sym in out.signature.predicates.values())
    assert validate_structure(out).ok
    assert invert_pipeline(out, trace) == s


def test_already_normalized_is_unchanged():
    s = two_point_normalized()
    out, trace = normalize_pipeline(s)
    assert out == s and trace.stages == []


def test_diameter_error():
    one = FinitePresentation(Signature.empty("O"), {"O": ["a"]}, {"O": [[0]]}, {})
    with pytest.raises(DiameterError):
        normalize_pipeline(one, r=F(1, 2))


@pytest.mark.parametrize("stage", STAGES)
def test_stage_prefix(stage):
    s = generate(4, 1)[0]
    out, trace = normalize_pipeline(s, stop_after=stage)
    assert trace.names[-1] == stage
    assert invert_pipeline(out, trace) == s


def test_trace_json_round_trip(normalized_corpus):
    for out, trace in normalized_corpus[:5]:
        again = PipelineTrace.from_json(json.loads(json.dumps(trace.to_json())))
        assert invert_pipeline(out, again) == invert_pipeline(out, trace)


def test_pipeline_outputs_are_valid(corpus, normalized_corpus):
    for s, (out, trace) in zip(corpus, normalized_corpus):
        assert validate_structure(out).ok
        assert invert_pipeline(out, trace) == s
        # 2 * half_d reproduces the pre-stage metric exactly
        merged, _ = normalize_pipeline(s, stop_after="uuc")
        half = out.predicates["half_d[U]"]
        names = out.points["U"]
        assert all(2 * half[(a, b)] == merged.dist("U", a, b) for a in names for b in names)


@pytest.mark.parametrize("seed", range(8))
def test_pipeline_preserves_substructures(seed):
    rng = random.Random(seed)
    s = random_structure(rng, max_points=4, max_preds=2, max_arity=2)
    keep = {o: rng.sample(list(p), max(1, len(p) - 1)) for o, p in s.points.items()}
    keep[s.signature.home] = list(s.points[s.signature.home])[:2]
    sub = s.restrict(keep)
    big, _ = normalize_pipeline(s)
    small, _ = normalize_pipeline(sub)
    wanted = ["*"] + [f"{o}:{p}" for o in s.signature.sorts for p in s.points[o] if p in keep[o]]
    assert big.restrict({"U": wanted}) == small
