"""Command-line interface.

Exit codes: 0 success or constraint satisfied, 1 constraint violated,
2 usage or parse error, 3 infeasible, 4 refinement budget exhausted.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

from .algebra import AlgebraError, PoleError, render_polynomial, render_rational
from .bn import NotWellFormed, PbnError
from .pbif_io import PbifSyntaxError, QuerySyntaxError, load_pbn, parse_query, write_explicit_pmc
from .pla import ACCEPTING, REJECTING, RegionPartition, partition_query
from .pmc import EvidenceImpossible, QueryFunctions
from .synth import PsoConfig, feasibility_pso, minimal_change_tuning, simple_tuning
from .transform import build_evidence_pmc, build_pmc

EXIT_OK, EXIT_UNSAT, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_BUDGET = 0, 1, 2, 3, 4

log = logging.getLogger("pbnsynth")


class UsageError(Exception):
    pass


def parse_instantiation(text: str) -> Dict[str, Fraction]:
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        name, sep, value = part.partition("=")
        if not sep:
            raise UsageError(f"bad instantiation entry {part!r}; expected name=value")
        try:
            out[name.strip()] = Fraction(value.strip())
        except ValueError:
            raise UsageError(f"bad value in {part!r}") from None
    return out


def read_config(path: str) -> Dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; keys use flag names without dashes."""
    cfg = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{n}: expected key = value")
            cfg[key.strip().replace("-", "_")] = value.strip()
    return cfg


def _fraction(text) -> Fraction:
    try:
        return Fraction(str(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _coverage(text) -> Fraction:
    c = _fraction(text)
    if not 0 < c < 1:
        raise argparse.ArgumentTypeError("coverage must lie strictly between 0 and 1")
    return c


# -- commands ---------------------------------------------------------------------


def _load(args):
    b = load_pbn(args.model)
    q = parse_query(args.query, b) if getattr(args, "query", None) else None
    return b, q


def _point(b, args, required=True):
    if not args.instantiation:
        if len(b.params) and required:
            raise UsageError("--instantiation is required for a parametric model")
        return tuple(p.lower for p in b.params) if len(b.params) else ()
    return b.params.instantiation(parse_instantiation(args.instantiation))


def _emit(args, payload: dict):
    text = json.dumps(payload, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)


def cmd_check(args) -> int:
    b, q = _load(args)
    if q is None:
        raise UsageError("--query is required")
    point = _point(b, args)
    qf = QueryFunctions(b, q, args.mode)
    value = qf.value(point)
    ok = qf.satisfied(point)
    print(f"{float(value):.6f}")
    print(f"exact: {value}")
    print(f"constraint {q}: {'satisfied' if ok else 'violated'}")
    return EXIT_OK if ok else EXIT_UNSAT


def cmd_function(args) -> int:
    b, q = _load(args)
    if q is None:
        raise UsageError("--query is required")
    f = QueryFunctions(b, q, args.mode).combined()
    print(render_rational(f))
    payload = {
        "query": str(q),
        "parameters": list(b.params.names),
        "variables": [b.params[i].name for i in f.variables()],
        "numerator": render_polynomial(f.numerator),
        "denominator": render_polynomial(f.denominator),
        "function": render_rational(f),
    }
    _emit(args, payload)
    return EXIT_OK


def render_svg(part: RegionPartition, size: int = 400, margin: int = 50) -> str:
    params = part.box.params
    if len(params) > 2:
        raise UsageError("SVG limited to 2 parameters")
    if len(params) == 0:
        raise UsageError("SVG needs at least one parameter")
    (x0, x1) = [float(v) for v in part.box.intervals[0]]
    (y0, y1) = [float(v) for v in part.box.intervals[1]] if len(params) == 2 else (0.0, 1.0)
    sx = size / ((x1 - x0) or 1.0)
    sy = size / ((y1 - y0) or 1.0)
    colors = {ACCEPTING: "#2ca02c", REJECTING: "#d62728"}
    w = size + 2 * margin
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{w}" viewBox="0 0 {w} {w}">',
        f'<rect x="{margin}" y="{margin}" width="{size}" height="{size}" fill="white" stroke="black"/>',
    ]
    for r, lab in part.regions:
        a, b = [float(v) for v in r.intervals[0]]
        c, d = [float(v) for v in r.intervals[1]] if len(params) == 2 else (0.0, 1.0)
        px = margin + (a - x0) * sx
        py = margin + (y1 - d) * sy
        fill = colors.get(lab, "white")
        lines.append(
            f'<rect x="{px:.3f}" y="{py:.3f}" width="{(b - a) * sx:.3f}" height="{(d - c) * sy:.3f}" '
            f'fill="{fill}" stroke="black" stroke-width="0.2"/>'
        )
    lines.append(f'<text x="{margin + size / 2}" y="{w - 15}" text-anchor="middle" font-size="16">{params[0].name}</text>')
    if len(params) == 2:
        lines.append(
            f'<text x="15" y="{margin + size / 2}" text-anchor="middle" font-size="16" '
            f'transform="rotate(-90 15 {margin + size / 2})">{params[1].name}</text>'
        )
    for val, pos in ((x0, margin), (x1, margin + size)):
        lines.append(f'<text x="{pos}" y="{margin + size + 18}" text-anchor="middle" font-size="11">{val:g}</text>')
    if len(params) == 2:
        for val, pos in ((y0, margin + size), (y1, margin)):
            lines.append(f'<text x="{margin - 6}" y="{pos + 4}" text-anchor="end" font-size="11">{val:g}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def cmd_partition(args) -> int:
    b, q = _load(args)
    if q is None:
        raise UsageError("--query is required")
    if args.svg and len(b.params) > 2:
        raise UsageError("SVG limited to 2 parameters")
    part = partition_query(b, q, coverage=args.coverage, max_regions=args.max_regions, threads=args.threads)
    payload = {"constraint": str(q), "coverage_requested": float(args.coverage)}
    payload.update({k: v for k, v in part.to_json().items() if k != "constraint" and k != "coverage_requested"})
    text = json.dumps(payload, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    if args.svg:
        with open(args.svg, "w", encoding="utf-8") as fh:
            fh.write(render_svg(part))
    print(
        f"regions: {len(part.regions)}  accepting: {float(part.volume_fraction(ACCEPTING)):.6f}  "
        f"rejecting: {float(part.volume_fraction(REJECTING)):.6f}  coverage: {float(part.coverage_achieved):.6f}"
        + ("  (partial)" if part.partial else "")
    )
    return EXIT_BUDGET if part.partial else EXIT_OK


def cmd_tune(args) -> int:
    b, q = _load(args)
    if q is None:
        raise UsageError("--query is required")
    mode = args.mode
    if mode == "ratio" and q.kind != "ratio":
        raise UsageError("--mode ratio needs a RATIO(...) query")
    if mode == "difference" and q.kind != "difference":
        raise UsageError("--mode difference needs a DIFF(...) query")
    if mode == "minimal-change":
        u0 = _point(b, args)
        vary = [v.strip() for v in args.vary.split(",")] if args.vary else None
        metric = "euclidean" if args.metric in ("euclidean", "euclidean_params") else args.metric
        res = minimal_change_tuning(
            b, q, u0, metric=metric, coverage=args.coverage, vary=vary,
            max_regions=args.max_regions, threads=args.threads,
        )
    else:
        res = simple_tuning(b, q, PsoConfig(seed=args.seed))
    if res is None:
        _emit(args, {"result": "infeasible", "query": str(q)})
        return EXIT_INFEASIBLE
    _emit(args, res.to_json())
    return EXIT_OK


def cmd_export(args) -> int:
    b, q = _load(args)
    if q is not None and q.evidence:
        m = build_evidence_pmc(b, None, q.evidence, keep_open=q.hypothesis.variables if args.keep_hypothesis else ())
    else:
        m = build_pmc(b)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            write_explicit_pmc(m, fh)
    else:
        write_explicit_pmc(m, sys.stdout)
    return EXIT_OK


# -- parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pbnsynth", description="Parameter synthesis for parametric Bayesian networks")
    parser.add_argument("--config", help="key = value file mirroring the flags (flags win)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, query=True):
        p.add_argument("--model", required=True, help=".pbif or .bif file")
        p.add_argument("--query", required=query, help="e.g. 'P(A=yes | B=no) <= 0.2'")
        p.add_argument("--out", help="write JSON (or the pMC) here")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--coverage", type=_coverage, default=Fraction(99, 100))
        p.add_argument("--max-regions", type=int, default=10 ** 6)

    p = sub.add_parser("check", help="evaluate a query at an instantiation")
    common(p)
    p.add_argument("--instantiation", help="e.g. p=0.36,q=0.27")
    p.add_argument("--mode", choices=("evidence_tailored", "plain"), default="evidence_tailored")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("function", help="print the sensitivity function")
    common(p)
    p.add_argument("--mode", choices=("evidence_tailored", "plain"), default="evidence_tailored")
    p.set_defaults(func=cmd_function)

    p = sub.add_parser("partition", help="approximate parameter-space partitioning")
    common(p)
    p.add_argument("--svg", help="write an SVG picture (at most 2 parameters)")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("tune", help="parameter tuning")
    common(p)
    p.add_argument("--mode", choices=("feasible", "ratio", "difference", "minimal-change"), default="feasible")
    p.add_argument("--instantiation", help="reference point u0 for minimal-change")
    p.add_argument("--metric", choices=("euclidean", "euclidean_params", "cd"), default="euclidean")
    p.add_argument("--vary", help="comma-separated parameters to vary (minimal-change)")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("export", help="write the explicit pMC")
    common(p, query=False)
    p.add_argument("--keep-hypothesis", action="store_true", help="keep hypothesis variables in final states")
    p.set_defaults(func=cmd_export)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: List[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = read_config(known.config)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for sp in subparsers.choices.values():
        defaults = {}
        for action in sp._actions:
            if action.dest in cfg:
                raw = cfg[action.dest]
                value = action.type(raw) if action.type else raw
                if isinstance(action, argparse._StoreTrueAction):
                    value = raw.lower() in ("1", "true", "yes", "on")
                defaults[action.dest] = value
                action.required = False
        sp.set_defaults(**defaults)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except (UsageError, OSError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "model", None) is None:
        print("error: --model is required", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (PbifSyntaxError, QuerySyntaxError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, EvidenceImpossible, NotWellFormed, PoleError, PbnError, AlgebraError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
