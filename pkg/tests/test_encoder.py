import json
import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import normalized_single_sort
from metcodec.encoder import (
    INFINITY,
    RAW,
    TAG,
    UNIT,
    Base,
    EncodingError,
    Level,
    encode,
    encode_finite_sorts,
    encoded_distance,
    parse_label,
    rescale,
)
from metcodec.fixtures import TIGHT_CASES, two_point_normalized
from metcodec.numerics import PLFunction
from metcodec.structures import FinitePresentation, PredicateSymbol, Signature
from metcodec.verifier import check_triangle

FIX = two_point_normalized()


@pytest.fixture(scope="module")
def X():
    return encode(FIX, level_cap=4)


def test_case_list_examples(X):
    d = lambda p, q: encoded_distance(X, p, q)
    assert d(Base("a"), Level(0, "b")) == F(5, 2)
    assert d(Level(0, "a"), Level(1, "b")) == F(3, 4)
    assert d(INFINITY, TAG) == 4
    assert d(Level(2, "a"), TAG) == 4 + F(1, 8)
    assert d(Base("a"), INFINITY) == 2
    assert d(Level(3, "b"), INFINITY) == F(1, 8)
    assert d(Base("b"), TAG) == 5
    assert d(Level(1, "a"), Level(3, "b")) == F(1, 2) - F(1, 8)
    for p in X.points():
        assert d(p, p) == 0


def test_distances_are_symmetric_and_total_past_cap(X):
    pts = X.points() + [Level(9, "a"), Level(12, "b")]
    for p in pts:
        for q in pts:
            assert encoded_distance(X, p, q) == encoded_distance(X, q, p)
    assert encoded_distance(X, Level(9, "a"), Level(9, "b")) == F(1, 512)


def test_point_counts():
    assert len(encode(FIX, level_cap=3).materialize().points["X"]) == 10
    M = encode(FIX, level_cap=0).materialize()
    assert M.points["X"] == ("A:a", "A:b", "inf", "tag")
    assert M.dist("X", "A:a", "inf") == M.dist("X", "A:b", "inf") == 2


def test_unit_scale():
    U = encode(FIX, level_cap=3, scale=UNIT)
    assert encoded_distance(U, Base("a"), TAG) == F(5, 6)
    M = U.materialize()
    assert M.metadata["scale"] == "1/6"
    assert M.diameter("X") == F(5, 6)
    raw = encode(FIX, level_cap=3)
    assert encoded_distance(rescale(raw, UNIT), INFINITY, TAG) == F(2, 3)
    assert rescale(rescale(raw, UNIT), RAW).materialize() == raw.materialize()
    assert rescale(rescale(raw, UNIT), UNIT).materialize() == M


def test_labels_round_trip(X):
    for p in X.points():
        assert parse_label(p.label()) == p
    with pytest.raises(ValueError):
        parse_label("B7:x")


def test_unknown_points_rejected(X):
    with pytest.raises(EncodingError):
        encoded_distance(X, Base("zz"), TAG)


def test_non_lipschitz_source_rejected():
    # shrinking the metric leaves E too steep
    bad = FIX.replace(metric={"U": [[0, F(1, 4)], [F(1, 4), 0]]},
                      predicates={**FIX.predicates, "P0": {k: v / 4 for k, v in FIX.predicates["P0"].items()}})
    with pytest.raises(EncodingError, match="1-Lipschitz"):
        encode(bad)
    with pytest.raises(EncodingError, match="half the metric"):
        encode(FIX.replace(predicates={**FIX.predicates, "P0": FIX.predicates["E"]}))


def test_materialized_json_is_metric_only(X):
    data = json.loads(X.materialize().dumps())
    assert data["signature"]["predicates"] == {}
    assert data["metadata"]["level_cap"] == 4
    assert data["metadata"]["enumeration"] == ["P0", "E"]


def test_monotone_approach_to_infinity(X):
    vals = [encoded_distance(X, Level(n, "a"), INFINITY) for n in range(8)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] == F(1, 128)


@settings(max_examples=30)
@given(st.integers(0, 10_000), st.integers(2, 5))
def test_coupling_bounds_and_isometry(seed, n_points):
    s = normalized_single_sort(random.Random(seed), n_points)
    X = encode(s, level_cap=4)
    names = s.points["U"]
    for a in names:
        for b in names:
            assert encoded_distance(X, Base(a), Base(b)) == s.dist("U", a, b)
            for n in range(3):
                v = encoded_distance(X, Level(n, a), Level(n + 1, b))
                assert F(1, 2 ** (n + 1)) <= v <= F(1, 2 ** n)


@settings(max_examples=30)
@given(st.integers(0, 10_000), st.integers(1, 5), st.integers(0, 5))
def test_encoded_space_is_metric(seed, n_points, cap):
    s = normalized_single_sort(random.Random(seed), n_points)
    assert check_triangle(encode(s, level_cap=cap).materialize()) == []


def test_tamper_breaking_first_argument_is_caught():
    s = normalized_single_sort(random.Random(3), 4, scale=F(1, 2))
    names = s.points["U"]
    i, j = names[0], names[1]
    d = s.dist("U", i, j)
    table = dict(s.predicates["Q0"])
    table[(i, j)] = min(F(1), table[(j, j)] + d + F(1, 32)) if table[(j, j)] + d + F(1, 32) <= 1 else \
        max(F(0), table[(j, j)] - d - F(1, 32))
    bad = s.replace(predicates={**s.predicates, "Q0": table})
    X = encode(bad, level_cap=4, validate=False)
    assert check_triangle(X.materialize())


@pytest.mark.parametrize("case", TIGHT_CASES, ids=lambda c: c.name)
def test_tight_cases(case):
    M = case.space()
    p, q, r = case.triple
    srt = M.single_sort
    slack = M.dist(srt, p, q) + M.dist(srt, q, r) - M.dist(srt, p, r)
    assert slack == case.slack >= 0
    assert check_triangle(M) == []


# -- graph encoding ------------------------------------------------------------

def graph_source():
    ident = PLFunction.identity()
    sig = Signature(("O", "Q"), {"R": PredicateSymbol(("O", "Q"), ident), "S": PredicateSymbol(("O",), ident)}, "O")
    return FinitePresentation(
        sig, {"O": ["a", "b"], "Q": ["c"]}, {"O": [[0, F(1, 2)], [F(1, 2), 0]], "Q": [[0]]},
        {"R": {("a", "c"): F(1), ("b", "c"): F(1, 2)}, "S": {("a",): F(0), ("b",): F(1, 4)}})


def test_graph_encoding_examples():
    G = encode_finite_sorts(graph_source(), level_cap=3)
    M = G.materialize()
    assert check_triangle(M) == []
    labels = M.points[M.single_sort]
    D = {(labels[i], labels[j]): M.metric[M.single_sort][i][j] for i in range(len(labels)) for j in range(len(labels))}
    tag = [x for x in labels if x.startswith("tag")][0]
    by_node = {}
    for x in labels:
        if x != tag:
            by_node.setdefault(x.split(":")[0], set()).add(D[(x, tag)])
    # one t-distance per node, distinct across nodes, all in [5, 6)
    assert all(len(v) == 1 for v in by_node.values())
    tvals = [v.pop() for v in by_node.values()]
    assert len(set(tvals)) == len(tvals)
    assert all(5 <= v < 6 for v in tvals)
    others = [v for (x, y), v in D.items() if x != y and tag not in (x, y)]
    assert all(2 <= v <= 3 or v == 4 or v <= 1 for v in others)
    assert 4 in others


def test_graph_coupling_value():
    G = encode_finite_sorts(graph_source(), level_cap=3)
    M = G.materialize()
    labels = M.points[M.single_sort]
    vals = sorted({M.metric[M.single_sort][i][j] for i in range(len(labels)) for j in range(len(labels))})
    # R(a, c) = 1 is the first enumerated predicate: coupling 2 + 2^-1 * 1
    assert F(5, 2) in vals
