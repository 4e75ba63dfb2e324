"""Nudge one encoded distance and watch the axiom checker report the broken axiom."""

from fractions import Fraction as F

from metcodec.encoder import encode
from metcodec.fixtures import two_point_normalized
from metcodec.verifier import check_theory

X = encode(two_point_normalized(), level_cap=3).materialize()
names = X.points["X"]
i, j = names.index("A:a"), names.index("A1:b")
m = [list(r) for r in X.metric["X"]]
m[i][j] = m[j][i] = m[i][j] + F(1, 64)
rep = check_theory(X.replace(metric={"X": m}))
print(f"d({names[i]}, {names[j]}) raised by 1/64 -> {rep.status}")
for r in rep.failures()[:3]:
    print("  ", r.axiom, r.witness)
