"""Grid majorants of a non-concave modulus converge from below, with a certified gap."""

from fractions import Fraction as F

from metcodec.modulus import concave_majorant, exact_concave_majorant
from metcodec.numerics import PLFunction

delta = PLFunction(((0, 0), (F(1, 3), F(1, 9)), (F(3, 5), F(4, 5)), (1, 1)))
alpha = exact_concave_majorant(delta)
print("delta breakpoints:", [(str(x), str(y)) for x, y in delta.points])
print("alpha breakpoints:", [(str(x), str(y)) for x, y in alpha.points])
for n in range(0, 9, 2):
    res = concave_majorant(delta, n)
    worst = max(alpha(x) - res.alpha_n(x) for x in set(alpha.xs) | set(res.alpha_n.xs))
    print(f"n={n}: max(alpha - alpha_n) = {worst}  certified gap = {res.certified_gap}")
