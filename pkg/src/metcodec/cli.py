"""Command-line front end.

    metcodec normalize IN [--stage S] [-o OUT]
    metcodec encode IN [--levels N] [--scale raw|unit] [-o OUT]
    metcodec decode IN [--original] [-o OUT]
    metcodec verify IN [--triangle] [--axioms TS|TL] [--eps E] [--r R]
    metcodec query IN --dist P Q [--prec K]
    metcodec roundtrip IN [--levels N] [--eps E]
    metcodec gen --seed S [--points N] [--preds K] [--sorts M] [--count C]

Exit status: 0 success, 1 verification failure, 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import corpus
from .decoder import DecodeError, recover_structure
from .encoder import RAW, UNIT, EncodingError, encode
from .numerics import DomainError, as_rational, format_rational
from .structures import FinitePresentation, PointId, StructureError, validate_structure, wrap_finite
from .transforms import STAGES, PipelineTrace, invert_pipeline, normalize_pipeline, normalize_stage_name
from .verifier import check_theory, check_triangle

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

# read once at startup
LEVEL_CAP = int(os.environ.get("METCODEC_LEVEL_CAP", "6"))


class InputError(Exception):
    pass


def _load(path: str, bounded: bool = True) -> FinitePresentation:
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON ({exc})") from exc
    encoded = isinstance(data, dict) and "scale" in (data.get("metadata") or {})
    return FinitePresentation.from_json(data, as_rational(1) if bounded and not encoded else None)


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")


def _normalized(s: FinitePresentation, stage: Optional[str] = None):
    """``s`` itself when it already carries an enumeration, else its normalization."""
    if stage is None and s.metadata.get("enumeration"):
        trace = s.metadata.get("trace")
        return s, PipelineTrace.from_json(trace) if trace else None
    return normalize_pipeline(s, stop_after=stage)


def cmd_normalize(args) -> int:
    s = _load(args.input)
    out, trace = normalize_pipeline(s, stop_after=args.stage)
    out.metadata["trace"] = trace.to_json()
    _emit(out.dumps(), args.output)
    return EXIT_OK


def cmd_encode(args) -> int:
    s = _load(args.input)
    n, trace = _normalized(s)
    X = encode(n, level_cap=args.levels, scale=args.scale, trace=trace)
    _emit(X.materialize().dumps(), args.output)
    return EXIT_OK


def cmd_decode(args) -> int:
    X = _load(args.input, bounded=False)
    out = recover_structure(X, args.enum_length)
    if args.original:
        trace = X.metadata.get("trace")
        if trace is None:
            raise InputError("--original needs a pipeline trace in the metadata block")
        out = invert_pipeline(out, PipelineTrace.from_json(trace))
    else:
        if "trace" in X.metadata:
            out.metadata["trace"] = X.metadata["trace"]
    _emit(out.dumps(), args.output)
    return EXIT_OK


def cmd_verify(args) -> int:
    X = _load(args.input, bounded=False)
    report = {}
    ok = True
    if args.triangle or not args.axioms:
        bad = []
        for srt in X.signature.sorts:
            bad.extend([srt, *t] for t in check_triangle(X, srt))
        report["triangle"] = {"violations": len(bad), "first": bad[:5]}
        ok = ok and not bad
    if args.axioms:
        rep = check_theory(X, args.axioms, eps=args.eps, r=args.r, c=args.c)
        report["axioms"] = rep.to_json()
        ok = ok and rep.ok
    report["status"] = "pass" if ok else "fail"
    _emit(json.dumps(report, indent=1, ensure_ascii=False), args.output)
    if not ok:
        failed = [a["axiom"] for a in report.get("axioms", {}).get("axioms", []) if a["status"] != "holds"]
        print("verification failed" + (f": {', '.join(failed[:5])}" if failed else ""), file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_query(args) -> int:
    s = _load(args.input, bounded=False)
    srt = args.sort or s.single_sort
    names = list(s.points[srt])
    p, q = args.dist
    try:
        i, j = names.index(p), names.index(q)
    except ValueError as exc:
        raise InputError(f"unknown point in sort {srt!r}: {exc}") from exc
    oracle = wrap_finite(s)
    v = oracle.query_distance(PointId(srt, i), PointId(srt, j), args.prec)
    _emit(format_rational(v), args.output)
    return EXIT_OK


def cmd_roundtrip(args) -> int:
    s = _load(args.input)
    n, trace = normalize_pipeline(s)
    levels = max(args.levels, len(n.metadata["enumeration"]) + 1)
    X = encode(n, level_cap=levels, trace=trace).materialize()
    back = recover_structure(X)
    orig = invert_pipeline(back, trace)
    eps = as_rational(args.eps)
    diffs = _differences(n, back) + _differences(s, orig)
    worst = max((d for _, d in diffs), default=as_rational(0))
    report = {
        "points": len(X.points[X.single_sort]),
        "level_cap": levels,
        "discrepancies": len([d for _, d in diffs if d > eps]),
        "max_discrepancy": format_rational(worst),
        "first": [[w, format_rational(d)] for w, d in diffs if d > eps][:5],
    }
    _emit(json.dumps(report, indent=1), args.output)
    return EXIT_OK if worst <= eps else EXIT_FAIL


def _differences(a: FinitePresentation, b: FinitePresentation) -> list:
    """``[(where, |difference|)]`` over every metric and predicate entry."""
    if a.signature != b.signature or a.points != b.points:
        return [("shape", as_rational(1))]
    out = []
    for srt, names in a.points.items():
        for i, x in enumerate(names):
            for j, y in enumerate(names):
                out.append((f"d[{srt}]({x},{y})", abs(a.metric[srt][i][j] - b.metric[srt][i][j])))
    for p, table in a.predicates.items():
        for key, v in table.items():
            out.append((f"{p}{key}", abs(v - b.predicates[p][key])))
    return out


def cmd_gen(args) -> int:
    structures = corpus.generate(args.seed, args.count, max_points=args.points, max_sorts=args.sorts,
                                 max_preds=args.preds, den=args.den)
    for s in structures:
        if not validate_structure(s).ok:  # pragma: no cover - the generator guarantees this
            raise StructureError("generated structure failed validation")
    if args.count == 1:
        _emit(structures[0].dumps(), args.output)
    elif args.output:
        d = Path(args.output)
        d.mkdir(parents=True, exist_ok=True)
        for i, s in enumerate(structures):
            (d / f"s{i:03d}.json").write_text(s.dumps() + "\n", encoding="utf-8")
    else:
        _emit(json.dumps([s.to_json() for s in structures], indent=1, ensure_ascii=False), None)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="metcodec", description="Encode metric structures as metric spaces.")
    sub = ap.add_subparsers(dest="command", required=True)

    def rational(text):
        try:
            return as_rational(text)
        except (ValueError, DomainError, ZeroDivisionError) as exc:
            raise argparse.ArgumentTypeError(f"not a rational: {text!r}") from exc

    def stage(text):
        try:
            return normalize_stage_name(text)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc

    def with_io(p, needs_input=True):
        if needs_input:
            p.add_argument("input", help="structure JSON file, or - for stdin")
        p.add_argument("-o", "--output", help="write here instead of stdout")
        return p

    p = with_io(sub.add_parser("normalize", help="run the normalization pipeline"))
    p.add_argument("--stage", type=stage, metavar="STAGE",
                   help="stop after this stage: " + ", ".join(STAGES))
    p.set_defaults(func=cmd_normalize)

    p = with_io(sub.add_parser("encode", help="encode as a metric space (normalizing first if needed)"))
    p.add_argument("--levels", type=int, default=LEVEL_CAP, help="levels to materialize (default %(default)s)")
    p.add_argument("--scale", choices=(RAW, UNIT), default=RAW)
    p.set_defaults(func=cmd_encode)

    p = with_io(sub.add_parser("decode", help="recover the normalized structure"))
    p.add_argument("--enum-length", type=int, help="number of predicates to recover")
    p.add_argument("--original", action="store_true", help="undo the normalization using the stored trace")
    p.set_defaults(func=cmd_decode)

    p = with_io(sub.add_parser("verify", help="check the triangle inequality and/or an axiom suite"))
    p.add_argument("--triangle", action="store_true")
    p.add_argument("--axioms", choices=("TS", "TL"))
    p.add_argument("--eps", type=rational, default=as_rational(0))
    p.add_argument("--r", type=rational, help="diameter threshold for the home sort")
    p.add_argument("--c", type=rational, default=as_rational(5), help="set-distance coefficient")
    p.set_defaults(func=cmd_verify)

    p = with_io(sub.add_parser("query", help="distance to precision 2^-k through the oracle interface"))
    p.add_argument("--dist", nargs=2, metavar=("P", "Q"), required=True)
    p.add_argument("--prec", type=int, default=20)
    p.add_argument("--sort")
    p.set_defaults(func=cmd_query)

    p = with_io(sub.add_parser("roundtrip", help="normalize, encode, decode and undo; report differences"))
    p.add_argument("--levels", type=int, default=LEVEL_CAP)
    p.add_argument("--eps", type=rational, default=as_rational(0))
    p.set_defaults(func=cmd_roundtrip)

    p = with_io(sub.add_parser("gen", help="seeded random valid structures"), needs_input=False)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--points", type=int, default=6, help="max points per sort")
    p.add_argument("--preds", type=int, default=3, help="max predicates")
    p.add_argument("--sorts", type=int, default=2, help="max sorts")
    p.add_argument("--den", type=int, default=corpus.DEFAULT_DENOMINATOR, help="grid denominator")
    p.add_argument("--count", type=int, default=1)
    p.set_defaults(func=cmd_gen)
    return ap


def _check_config(args) -> None:
    if getattr(args, "levels", 1) < 1:
        raise InputError("--levels must be at least 1")
    if getattr(args, "prec", 0) < 0:
        raise InputError("--prec must be non-negative")
    r = getattr(args, "r", None)
    if r is not None and not 0 < r <= 1:
        raise InputError("--r must lie in (0, 1]")


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        _check_config(args)
        return args.func(args)
    except (InputError, StructureError, EncodingError, DecodeError, DomainError, ValueError, KeyError) as exc:
        print(f"metcodec {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
