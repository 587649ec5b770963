"""``sgalab`` command line: run checks, print tables or json-lines, summarize reports."""

from __future__ import annotations

import argparse
import csv
import inspect
import json
import os
import sys
from typing import Callable, Sequence

import numpy as np

from . import suites as su
from .cocycles import CochainError
from .densities import DensityError
from .liecase import F_CHOICES, LieDomainError, plane_wave_star
from .poisson import LINEAR_NAMES, ConfigError
from .spray_groupoid import ComposablePairChart, DomainError, build_generating_function, gamma_S

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2
USAGE_ERRORS = (ConfigError, DomainError, LieDomainError, DensityError, CochainError, KeyError, ValueError)


class Output:
    """Collects records and writes them as a table or as json-lines."""

    def __init__(self, fmt: str, stream, timing: bool):
        self.fmt = fmt
        self.stream = stream
        self.timing = timing

    def emit_report(self, rep: su.Report):
        records = rep.records(self.timing)
        if self.fmt == "json-lines":
            for rec in records:
                self.line(rec)
            return
        summary = records[-1]
        flag = "PASS" if summary["pass"] else "FAIL"
        extra = f"  t={summary['wall_time']:.2f}s" if self.timing else ""
        print(
            f"{flag}  {rep.check:26s} {rep.structure:14s} n={summary['samples']:<4d} max={summary['max_residual']:.3e}  ({summary['criterion']}, tol={rep.tol:.0e}){extra}",
            file=self.stream,
        )
        for rec in records[:-1]:
            if not rec["pass"] and not rep.detection:
                print(f"      sample {rec['sample']}: residual {rec['residual']:.3e}  {json.dumps(rec.get('inputs', {}))}", file=self.stream)

    def line(self, rec: dict):
        print(json.dumps(rec, sort_keys=True), file=self.stream)


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _call(fn: Callable, args, **fixed):
    """Call a check with the generic flags it accepts."""
    params = inspect.signature(fn).parameters
    kwargs = dict(fixed)
    for flag, key in (("samples", "samples"), ("order", "order"), ("pmax", "pmax"), ("amax", "amax")):
        value = getattr(args, flag, None)
        if value is not None and key in params:
            kwargs[key] = value
    return fn(args.seed, **kwargs)


def _structures(args, default: Sequence[str], lie_only: bool = False) -> list[str]:
    if getattr(args, "lie", None):
        return [args.lie]
    if not lie_only and getattr(args, "pi", None):
        return [args.pi]
    return list(default)


def _apply_tol(reports: list[su.Report], tol):
    if tol is not None:
        for rep in reports:
            rep.tol = tol
    return reports


# ---------------------------------------------------------------------------
# verbs


def cmd_check_sga(args):
    return [_call(su.check_sga, args, name=s) for s in _structures(args, su.CLOSED_NAMES)]


def cmd_cocycle(args):
    out = []
    for s in _structures(args, su.REALIZATION_NAMES):
        out.append(_call(su.check_gamma_cocycle, args, name=s))
        out.append(_call(su.check_unit_propagation, args, name=s))
    return out


def cmd_identity_axiom(args):
    return [_call(su.check_identity_axiom, args, name=s, factor=args.factor) for s in _structures(args, su.REALIZATION_NAMES)]


def cmd_split(args):
    return [_call(su.check_split, args, name=s, broken=args.broken) for s in _structures(args, su.SPLIT_NAMES, True)]


def cmd_duflo(args):
    return [_call(su.check_duflo, args, name=s, F_choice=args.F) for s in _structures(args, LINEAR_NAMES, True)]


def cmd_star(args):
    choices = [args.F] if args.F else F_CHOICES
    return [_call(su.check_star, args, name=s, F_choice=F) for s in _structures(args, LINEAR_NAMES, True) for F in choices]


def cmd_suite(args):
    if args.name == "duflo" and args.lie:
        return su.suite_duflo(args.seed, names=(args.lie,))
    return su.run_suite(args.name, args.seed)


def cmd_gamma(args, out: Output) -> int:
    spec = args.lie or args.pi
    if not spec:
        raise ConfigError("gamma needs --pi or --lie")
    pi = su.resolve_structure(spec)
    for name, v in (("p1", args.p1), ("p2", args.p2), ("x", args.x)):
        if v.shape != (pi.dim,):
            raise ConfigError(f"--{name} needs {pi.dim} components")
    S = build_generating_function(pi, None, args.order or 10)
    value = gamma_S(S, ComposablePairChart(args.p1, args.p2, args.x))
    rec = {"check": "gamma", "tag": "canonical factor in the J-chart", "structure": pi.name, "backend": S.backend, "order": S.order,
           "p1": su._vec(args.p1), "p2": su._vec(args.p2), "x": su._vec(args.x), "gamma_S": float(value)}
    if pi.lie is not None:
        _, ratio = plane_wave_star(pi.lie, "F_K", args.p1, args.p2)
        rec["F_K_ratio"] = float(ratio)
        rec["relative_gap"] = float(abs(value - ratio) / abs(ratio))
    if out.fmt == "json-lines":
        out.line(rec)
    else:
        cols = [f"gamma_S = {value:.15f}"]
        if "F_K_ratio" in rec:
            cols.append(f"F_K ratio = {rec['F_K_ratio']:.15f}")
            cols.append(f"gap = {rec['relative_gap']:.2e}")
        print("  ".join(cols), file=out.stream)
    return EXIT_PASS


def cmd_expand_s(args, out: Output) -> int:
    spec = args.lie or args.pi
    if not spec:
        raise ConfigError("expand-s needs --pi or --lie")
    pi = su.resolve_structure(spec)
    backend = args.backend
    S = build_generating_function(pi, backend, args.order or 4)
    n = pi.dim
    names = [f"p1_{i}" for i in range(n)] + [f"p2_{i}" for i in range(n)] + [f"x_{i}" for i in range(n)]
    terms = sorted(S.poly.terms().items(), key=lambda kv: (sum(kv[0][: 2 * n]), kv[0][::-1]))
    for exps, c in terms:
        c = float(np.real(c))
        if abs(c) < args.cutoff:
            continue
        mono = "*".join(f"{v}^{e}" if e > 1 else v for v, e in zip(names, exps) if e) or "1"
        if out.fmt == "json-lines":
            out.line({"check": "expand-s", "structure": pi.name, "backend": S.backend, "order": S.order, "exponents": list(exps), "monomial": mono, "coefficient": c})
        else:
            print(f"{c: .15e}  {mono}", file=out.stream)
    return EXIT_PASS


def cmd_report(args, out: Output) -> int:
    """Summarize a json-lines report as delimited records."""
    source = open(args.input) if args.input != "-" else sys.stdin
    with source:
        rows = [json.loads(line) for line in source if line.strip()]
    summaries = [r for r in rows if r.get("summary")]
    fields = ["check", "structure", "samples", "max_residual", "tol", "criterion", "pass"]
    writer = csv.DictWriter(out.stream, fieldnames=fields, delimiter="\t" if args.delimiter == "tsv" else ",", extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for r in summaries:
        writer.writerow(r)
    return EXIT_PASS if all(r["pass"] for r in summaries) else EXIT_FAIL


REPORT_VERBS = {
    "check-sga": cmd_check_sga,
    "cocycle": cmd_cocycle,
    "identity-axiom": cmd_identity_axiom,
    "split-assoc": cmd_split,
    "duflo": cmd_duflo,
    "star": cmd_star,
    "suite": cmd_suite,
}
DIRECT_VERBS = {"gamma": cmd_gamma, "expand-s": cmd_expand_s, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--pi", help="structure: shipped name, file:PATH or inline JSON")
    common.add_argument("--lie", help="Lie algebra: shipped name, file:PATH or inline JSON")
    common.add_argument("--order", type=int, help="truncation order N")
    common.add_argument("--pmax", type=float, help="radius for sampled covectors")
    common.add_argument("--amax", type=float, help="radius for sampled group coordinates")
    common.add_argument("--samples", type=int, help="number of samples")
    common.add_argument("--seed", type=int, default=0, help="PRNG seed")
    common.add_argument("--tol", type=float, help="override the default tolerance")
    common.add_argument("--format", choices=("table", "json-lines"), default="table")
    common.add_argument("--out", help="write output to this file")
    common.add_argument("--timing", action="store_true", help="add wall times (breaks byte-identical output)")

    parser = argparse.ArgumentParser(prog="sgalab", description="Numerical checks for local symplectic groupoids and their half-density enhancements.")
    sub = parser.add_subparsers(dest="verb", required=True)
    sub.add_parser("check-sga", parents=[common], help="associativity equation for S")
    sub.add_parser("cocycle", parents=[common], help="cocycle property and unit propagation of gamma_S")
    p = sub.add_parser("identity-axiom", parents=[common], help="identity axiom for f sigma_c")
    p.add_argument("--factor", type=float, default=1.0, help="constant f")
    p = sub.add_parser("split-assoc", parents=[common], help="split-form associativity on the action groupoid")
    p.add_argument("--broken", action="store_true", help="use a factor that is not a cocycle")
    p = sub.add_parser("duflo", parents=[common], help="gamma_S against the F-ratio")
    p.add_argument("--F", choices=F_CHOICES, default="F_K")
    p = sub.add_parser("star", parents=[common], help="plane-wave amplitude cocycle")
    p.add_argument("--F", choices=F_CHOICES)
    p = sub.add_parser("suite", parents=[common], help="run a named group of checks")
    p.add_argument("name", choices=("all",) + tuple(su.SUITES))
    p = sub.add_parser("gamma", parents=[common], help="evaluate gamma_S at one point")
    p.add_argument("--p1", type=_vector, required=True)
    p.add_argument("--p2", type=_vector, required=True)
    p.add_argument("--x", type=_vector, required=True)
    p = sub.add_parser("expand-s", parents=[common], help="coefficient table of S")
    p.add_argument("--backend", choices=("closed_zero", "closed_constant", "closed_linear", "series"))
    p.add_argument("--cutoff", type=float, default=1e-14)
    p = sub.add_parser("report", parents=[common], help="summarize json-lines as TSV or CSV")
    p.add_argument("input", help="json-lines file, or - for stdin")
    p.add_argument("--delimiter", choices=("tsv", "csv"), default="tsv")
    return parser


def run(argv: Sequence[str] | None = None, stream=None) -> int:
    args = build_parser().parse_args(argv)
    handle = open(args.out, "w") if args.out else None
    out = Output(args.format, handle or stream or sys.stdout, args.timing)
    try:
        if args.verb in DIRECT_VERBS:
            return DIRECT_VERBS[args.verb](args, out)
        reports = _apply_tol(REPORT_VERBS[args.verb](args), args.tol)
        for rep in reports:
            out.emit_report(rep)
        return EXIT_PASS if all(rep.passed for rep in reports) else EXIT_FAIL
    except USAGE_ERRORS as exc:
        print(f"sgalab: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    finally:
        if handle:
            handle.close()


def main(argv: Sequence[str] | None = None) -> int:
    try:
        code = run(argv)
        sys.stdout.flush()
    except BrokenPipeError:
        # reader closed early, e.g. piped into head; silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        code = EXIT_FAIL
    sys.exit(code)


if __name__ == "__main__":
    main()
