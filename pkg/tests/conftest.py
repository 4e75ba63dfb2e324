import random
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from metcodec.corpus import generate, random_metric, random_table
from metcodec.numerics import PLFunction
from metcodec.structures import FinitePresentation, PredicateSymbol, Signature
from metcodec.transforms import normalize_pipeline

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def rationals(den=64, lo=0, hi=1):
    return st.integers(lo * den, hi * den).map(lambda k: Fraction(k, den))


@st.composite
def pl_functions(draw, max_pieces=5, den=16, unit=True, zero_at_zero=False):
    k = draw(st.integers(1, max_pieces))
    xs = sorted(set(draw(st.lists(st.integers(1, den - 1), max_size=k - 1))))
    xs = [Fraction(0)] + [Fraction(x, den) for x in xs] + [Fraction(1)]
    lo, hi = (0, 1) if unit else (-2, 2)
    ys = [draw(rationals(den, lo, hi)) for _ in xs]
    if zero_at_zero:
        ys[0] = Fraction(0)
    return PLFunction(tuple(zip(xs, ys)))


@st.composite
def nondecreasing_moduli(draw, den=16):
    f = draw(pl_functions(den=den, zero_at_zero=True))
    ys = []
    best = Fraction(0)
    for _, y in f.points:
        best = max(best, y)
        ys.append(best)
    return PLFunction(tuple(zip(f.xs, ys)))


def normalized_single_sort(rng: random.Random, n: int, n_preds: int = 2, den: int = 64,
                           scale: Fraction = Fraction(1)) -> FinitePresentation:
    """A normalized structure built directly: ``P0 = d/2`` plus random binary
    predicates that are 1-Lipschitz for the max metric."""
    names = [f"p{i}" for i in range(n)]
    m = [[scale * v for v in row] for row in random_metric(rng, n, den)]
    ident = PLFunction.identity()
    preds = {"P0": PredicateSymbol(("U", "U"), ident)}
    tables = {"P0": {(names[i], names[j]): m[i][j] / 2 for i in range(n) for j in range(n)}}
    keys = [(a, b) for a in names for b in names]
    idx = {a: i for i, a in enumerate(names)}

    def dist(x, y):
        return max(m[idx[x[0]]][idx[y[0]]], m[idx[x[1]]][idx[y[1]]])

    for k in range(n_preds):
        preds[f"Q{k}"] = PredicateSymbol(("U", "U"), ident)
        tables[f"Q{k}"] = random_table(rng, keys, dist, ident, den)
    return FinitePresentation(Signature(("U",), preds, "U"), {"U": names}, {"U": m}, tables,
                              {"enumeration": list(preds), "unary": []})


@pytest.fixture(scope="session")
def corpus():
    return generate(2024, 30)


@pytest.fixture(scope="session")
def normalized_corpus(corpus):
    return [normalize_pipeline(s) for s in corpus]


# acceptance lines, printed once at the end of the run
ACCEPTANCE: dict = {}


def record(criterion: int, ok: bool, detail: str) -> str:
    line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
