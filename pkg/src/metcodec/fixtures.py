"""Small named structures used by the tests, the demos and the CLI.

``two_point_normalized`` is the running example: ``A = {a, b}`` at distance
1, ``P_0 = d/2`` and ``P_1 = E`` with ``E(a, b) = E(b, a) = 1`` and
``E(a, a) = E(b, b) = 0``; every later ``P_n`` is 0.

The tight-case fixtures pick out triples of the encoded space (or of a
disjoint union) where the triangle inequality is hardest to satisfy.  Each
entry records the triple ``(p, q, r)``, read as ``d(p, r) <= d(p, q) + d(q, r)``,
and the slack the inequality has on the fixture.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .numerics import ONE, ZERO, PLFunction
from .structures import FinitePresentation, PredicateSymbol, Signature
from .transforms import merge_sorts_cmdu


def two_point_normalized() -> FinitePresentation:
    ident = PLFunction.identity()
    sig = Signature(("U",), {"P0": PredicateSymbol(("U", "U"), ident), "E": PredicateSymbol(("U", "U"), ident)}, "U")
    half = Fraction(1, 2)
    p0 = {("a", "a"): ZERO, ("a", "b"): half, ("b", "a"): half, ("b", "b"): ZERO}
    e = {("a", "a"): ZERO, ("a", "b"): ONE, ("b", "a"): ONE, ("b", "b"): ZERO}
    return FinitePresentation(sig, {"U": ["a", "b"]}, {"U": [[ZERO, ONE], [ONE, ZERO]]}, {"P0": p0, "E": e},
                              {"enumeration": ["P0", "E"], "unary": []})


def two_sort_source() -> FinitePresentation:
    """Two sorts with one cross-sort predicate; used for the disjoint-union cases."""
    sig = Signature(("O", "Q"), {"R": PredicateSymbol(("O", "Q"), PLFunction.linear(2))}, "O")
    half = Fraction(1, 2)
    return FinitePresentation(
        sig, {"O": ["a", "b"], "Q": ["c", "e"]},
        {"O": [[ZERO, ONE], [ONE, ZERO]], "Q": [[ZERO, half], [half, ZERO]]},
        {"R": {("a", "c"): ZERO, ("a", "e"): Fraction(1, 4), ("b", "c"): half, ("b", "e"): Fraction(3, 4)}})


@dataclass(frozen=True)
class TightCase:
    name: str
    description: str
    triple: tuple  # point labels (p, q, r)
    slack: Fraction  # d(p, q) + d(q, r) - d(p, r) on the fixture

    def space(self) -> FinitePresentation:
        if self.name.startswith("union"):
            return merge_sorts_cmdu(two_sort_source())[0]
        from .encoder import encode
        return encode(two_point_normalized(), level_cap=4).materialize()


TIGHT_CASES = (
    TightCase("encoding.base_level",
              "d(x, (z,n)) <= d(x, (u,n+1)) + d((u,n+1), (z,n)); equality with x = u, d(x, z) = 1, P_n(z, u) = 0",
              ("A:a", "A3:a", "A2:b"), ZERO),
    TightCase("encoding.coupling_first",
              "d((z,n), (u,n+1)) <= d((z,n), (w,n)) + d((w,n), (u,n+1)); "
              "the middle bound 2^-(n+1) (1 + P_n(w,u) + d(z,w)) is attained",
              ("A1:b", "A1:a", "A2:a"), Fraction(1, 4)),
    TightCase("encoding.same_level",
              "d((z,n), (w,n)) <= d((z,n), (u,n+1)) + d((u,n+1), (w,n)); equality with d(z, w) = 1 and P_n = 0",
              ("A2:a", "A3:a", "A2:b"), ZERO),
    TightCase("encoding.coupling_second",
              "d((z,n), (v,n+1)) <= d((z,n), (u,n+1)) + d((u,n+1), (v,n+1)); "
              "equality when P_n(z, v) = P_n(z, u) + d(u, v)",
              ("A1:a", "A2:a", "A2:b"), ZERO),
    TightCase("encoding.tag",
              "d((z,n), t) <= d((z,n), (u,n+1)) + d((u,n+1), t)",
              ("A1:a", "A2:a", "tag"), Fraction(1, 8)),
    TightCase("union.same_sort_pair",
              "x, y in O_n and z in O_m: d(x, y) <= d(x, z) + d(z, y)",
              ("O:a", "Q:c", "O:b"), ZERO),
    TightCase("union.cross_pair",
              "x, y in O_n and z in O_m: d(x, z) <= d(x, y) + d(y, z)",
              ("Q:c", "Q:e", "*"), Fraction(1, 4)),
)


def tight_case(name: str) -> TightCase:
    for c in TIGHT_CASES:
        if c.name == name:
            return c
    raise KeyError(name)


__all__ = ["TIGHT_CASES", "TightCase", "tight_case", "two_point_normalized", "two_sort_source"]
