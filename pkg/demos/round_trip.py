"""Normalize, encode, decode and invert one random two-sorted structure."""

from metcodec.corpus import generate
from metcodec.decoder import decode
from metcodec.encoder import encode
from metcodec.transforms import invert_pipeline, normalize_pipeline
from metcodec.verifier import check_theory

s = next(x for x in generate(3, 20) if len(x.signature.sorts) == 2)
print("source sorts:", {o: len(p) for o, p in s.points.items()}, "predicates:", list(s.signature.predicates))

n, trace = normalize_pipeline(s)
print("stages:", trace.names)
print("normalized universe:", len(n.points["U"]), "points, enumeration", n.metadata["enumeration"])

cap = len(n.metadata["enumeration"]) + 1
X = encode(n, level_cap=cap, trace=trace).materialize()
print("encoded space:", len(X.points["X"]), "points with", cap, "levels")

rep = check_theory(X)
print("T_L axioms:", rep.status, "with", len(rep.results), "checks; Xi =", rep.values["Xi"])

back = decode(X)
assert back == n
assert invert_pipeline(back, trace) == s
print("decoded and inverted back to the source exactly")
