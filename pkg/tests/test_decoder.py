import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import normalized_single_sort
from metcodec.decoder import (
    InsufficientLevelsError,
    NotEncodedError,
    circ_value,
    classify_all,
    classify_distance,
    classify_point,
    decode,
    eval_set_distance,
    find_tag,
    level_bijection,
    recover_predicate,
)
from metcodec.encoder import TAG, UNIT, Base, Level, encode
from metcodec.fixtures import two_point_normalized
from metcodec.structures import FinitePresentation, Signature

FIX = two_point_normalized()


@pytest.fixture(scope="module")
def M():
    return encode(FIX, level_cap=4).materialize()


def idx(M, label):
    return M.points["X"].index(label)


def test_classify_distance():
    assert classify_distance(F(5)) == ("base",)
    assert classify_distance(F(17, 4)) == ("level", 1)
    assert classify_distance(F(0)) == ("tag",)
    assert classify_distance(F(4)) == ("inf",)
    assert classify_distance(F(9, 2)) == ("level", 0)
    assert classify_distance(F(3)) is None
    assert classify_distance(F(17, 4) + F(1, 1000)) is None


def test_find_tag(M):
    assert M.points["X"][find_tag(M)] == "tag"
    assert find_tag(encode(FIX, level_cap=3)) == TAG


def test_find_tag_rejects_non_encoded():
    half = F(1, 2)
    flat = FinitePresentation(Signature.empty("X"), {"X": ["p", "q", "r"]},
                              {"X": [[0, half, half], [half, 0, half], [half, half, 0]]}, {})
    with pytest.raises(NotEncodedError, match="no point"):
        find_tag(flat)
    twins = FinitePresentation(Signature.empty("X"), {"X": ["p", "q"]}, {"X": [[0, 4], [4, 0]]}, {},
                               value_bound=None)
    with pytest.raises(NotEncodedError, match="2 points"):
        find_tag(twins)
    with pytest.raises(NotEncodedError):
        decode(flat)


def test_classification_partition(M):
    classes = classify_all(M)
    counts = {}
    for c in classes.values():
        counts[c] = counts.get(c, 0) + 1
    assert counts == {("tag",): 1, ("inf",): 1, ("base",): 2, ("level", 0): 2, ("level", 1): 2,
                      ("level", 2): 2, ("level", 3): 2}


def test_classify_point_on_oracle_space():
    X = encode(FIX, level_cap=5, scale=UNIT)
    assert classify_point(X, TAG, Level(4, "a")) == ("level", 4)
    assert classify_point(X, TAG, Base("b")) == ("base",)


def test_level_bijection_and_circ(M):
    t = find_tag(M)
    a, b = idx(M, "A:a"), idx(M, "A:b")
    assert level_bijection(M, t, 0, a) == idx(M, "A0:a")
    assert circ_value(M, a, idx(M, "A0:b"), 0) == 1
    # the scaled-up variant of the level-n singleton formula
    assert circ_value(M, a, idx(M, "A2:b"), 2, literal=True) == 1
    assert circ_value(M, a, idx(M, "A2:b"), 2) == F(1, 4)
    assert classify_all(M, t)[level_bijection(M, t, 3, b)] == ("level", 3)


def test_recover_predicate(M):
    t = find_tag(M)
    a, b = idx(M, "A:a"), idx(M, "A:b")
    assert recover_predicate(M, t, 0, a, b) == F(1, 2)
    assert recover_predicate(M, t, 1, a, b) == 1
    assert recover_predicate(M, t, 1, a, a) == 0
    assert recover_predicate(M, t, 2, a, b) == 0
    # reading the truncation the other way round loses the value
    assert recover_predicate(M, t, 0, a, b, literal=True) == 0


def test_set_distance_coefficients(M):
    t = find_tag(M)
    p = idx(M, "A0:b")
    assert eval_set_distance(M, t, "A", p, c=2) == (1, 2)
    assert eval_set_distance(M, t, "A", p, c=5) == (2, 2)
    assert eval_set_distance(M, t, "A", idx(M, "A:a")) == (0, 0)


def test_set_distance_matches_brute_force_with_c5(normalized_corpus):
    for out, trace in normalized_corpus[:6]:
        X = encode(out, level_cap=3).materialize()
        t = find_tag(X)
        for p in range(len(X.points["X"])):
            for target in ("A", 0, 1, 2):
                v, true = eval_set_distance(X, t, target, p, c=5)
                assert v == true


def test_round_trip_fixture(M):
    assert decode(M) == FIX


def test_insufficient_levels():
    with pytest.raises(InsufficientLevelsError, match="insufficient levels"):
        decode(encode(FIX, level_cap=2).materialize())
    M = encode(FIX, level_cap=2).materialize()
    assert decode(M, enumeration_length=1).predicates["P0"] == FIX.predicates["P0"]


def test_unit_scale_decodes_the_same():
    raw = decode(encode(FIX, level_cap=3).materialize())
    unit = encode(FIX, level_cap=3, scale=UNIT).materialize()
    assert decode(unit) == raw
    # drop the metadata scale: the decoder infers unit units from the diameter
    bare = unit.replace(metadata={k: v for k, v in unit.metadata.items() if k != "scale"})
    assert decode(bare) == raw
    scaled = unit.replace(metric={"X": [[6 * v for v in row] for row in unit.metric["X"]]},
                          metadata={**unit.metadata, "scale": "1"})
    assert decode(scaled) == raw


@settings(max_examples=30)
@given(st.integers(0, 10_000), st.integers(1, 5), st.integers(0, 3))
def test_round_trip_random(seed, n_points, n_preds):
    s = normalized_single_sort(random.Random(seed), n_points, n_preds)
    cap = len(s.metadata["enumeration"]) + 1
    assert decode(encode(s, level_cap=cap).materialize()) == s


def test_decode_without_metadata_infers_enumeration():
    M = encode(FIX, level_cap=3).materialize()
    bare = M.replace(metadata={"scale": "1"})
    out = decode(bare)
    assert list(out.predicates) == ["P0", "P1"]
    assert out.predicates["P1"] == FIX.predicates["E"]
