"""Command-line front end.

Exit codes: 0 success, 1 usage or input error, 2 computation error,
3 negative result (non-member, signed power, inadmissible distribution).
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from pathlib import Path

import numpy as np

from . import families
from .charfn import admissibility_check, second_characteristic
from .divisibility import (
    is_member,
    lambda_scan,
    scaling_check,
    semigroup_spot_check,
)
from .errors import DivisorError, ParseError, ValidationError
from .fracpower import (
    SmoothedAtomicDensity,
    fractional_power,
    min_and_scale,
)
from .measures import GridSignedDensity, SignedAtomicMeasure
from .specfile import parse_spec

EXIT_OK, EXIT_USAGE, EXIT_COMPUTE, EXIT_NEGATIVE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def fmt(x) -> str:
    """Shortest round-trip text for a float."""
    return repr(float(x))


def write_csv(header, rows, out) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def _emit(header, rows, path, summary, stdout) -> None:
    if path:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            write_csv(header, rows, fh)
        print(summary, file=stdout)
    else:
        write_csv(header, rows, stdout)
        print(summary, file=sys.stderr)


def load_expr(args):
    if args.example:
        if args.spec:
            raise UsageError("give either a spec file or --example, not both")
        return families.EXAMPLES[args.example](args.alpha)
    if not args.spec:
        raise UsageError("a spec file (or --example) is required")
    try:
        text = sys.stdin.read() if args.spec == "-" else Path(args.spec).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {args.spec}: {exc.strerror}") from None
    return parse_spec(text)


# ---------------------------------------------------------------- commands


def cmd_psi(args, out):
    expr = load_expr(args)
    trace = second_characteristic(expr, args.ymax, args.samples)
    summary = (
        f"psi: {len(trace.y)} samples on [-{args.ymax:g}, {args.ymax:g}], "
        f"refinement depth {trace.refinement_depth}, psi(ymax) = {trace.at(args.ymax):.10g}"
    )
    _emit(("y", "re_psi", "im_psi"), trace.rows(), args.out, summary, out)
    return EXIT_OK


def _density_rows(result, args):
    if isinstance(result, SmoothedAtomicDensity):
        lo, hi = result.support_window(pad=5.0)
        lo = args.xmin if args.xmin is not None else lo
        hi = args.xmax if args.xmax is not None else hi
        grid = result.to_grid(lo, hi, args.points)
    else:
        lo = args.xmin if args.xmin is not None else -50.0
        hi = args.xmax if args.xmax is not None else 50.0
        grid = result.restrict(lo, hi)
    return list(zip(grid.x.tolist(), grid.values.tolist()))


def cmd_fracpow(args, out):
    expr = load_expr(args)
    result = fractional_power(expr, args.t, args.route)
    value, at, scale = min_and_scale(result)
    negative = value < -args.tol * scale
    if isinstance(result, SignedAtomicMeasure):
        header, rows = ("location", "weight"), result.atoms
        label = "min_weight"
    else:
        header, rows = ("x", "value"), _density_rows(result, args)
        label = "min_density"
    mass = result.total_mass
    summary = (
        f"{'SIGNED' if negative else 'NONNEGATIVE'} t={args.t:g} {label}={value:.5g} "
        f"at={at:.10g} mass={mass:.12g} rows={len(rows)}"
    )
    _emit(header, rows, args.out, summary, out)
    return EXIT_NEGATIVE if negative else EXIT_OK


def cmd_member(args, out):
    expr = load_expr(args)
    method = {"density": "auto", "psd": "gram_psd", "series": "series_density", "grid": "grid_density"}[args.method]
    verdict = is_member(expr, args.t, args.tol, method)
    print(verdict, file=out)
    return EXIT_OK if verdict.member else EXIT_NEGATIVE


def cmd_scan(args, out):
    expr = load_expr(args)
    method = {"density": "auto", "psd": "gram_psd", "series": "series_density", "grid": "grid_density"}[args.method]
    report = lambda_scan(expr, args.tmin, args.tmax, args.steps, args.tol, method, threads=args.threads)
    out.write(report.to_text())
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            write_csv(("t", "member", "method", "evidence_value"), report.csv_rows(), fh)
        print(f"wrote {len(report.verdicts)} verdicts to {args.out}", file=out)
    return EXIT_OK


def cmd_check(args, out):
    expr = load_expr(args)
    verdict = admissibility_check(expr, args.ymax, args.samples)
    print(
        f"admissibility: {verdict.verdict} on [-{args.ymax:g}, {args.ymax:g}] "
        f"min |cf| = {verdict.min_modulus:.6g} at y = {verdict.y_at:.10g}",
        file=out,
    )
    if not verdict.admissible:
        return EXIT_NEGATIVE
    checks = []
    trace = second_characteristic(expr, args.ymax, args.samples)
    try:
        trace.check_invariants()
        checks.append(("psi invariants", True))
    except AssertionError as exc:
        checks.append((f"psi invariants ({exc})", False))
    for s, t in ((1.0, 1.0), (1.0, 2.0)):
        checks.append((f"semigroup s={s:g} t={t:g}", semigroup_spot_check(expr, s, t)))
    for probe in (0.5, 1.0, 1.5):
        checks.append((f"scaling s=1 t=2 probe={probe:g}", scaling_check(expr, 1.0, 2.0, probe)))
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}", file=out)
    return EXIT_OK if all(ok for _, ok in checks) else EXIT_COMPUTE


# ------------------------------------------------------------------ parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="divisor", description="Fractional convolution powers and divisibility of distributions.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("spec", nargs="?", help="distribution spec file ('-' for stdin)")
        p.add_argument("--example", choices=sorted(families.EXAMPLES), help="built-in example instead of a spec file")
        p.add_argument("--alpha", type=float, default=0.5, help="alpha for --example (default 0.5)")
        return p

    p = common(sub.add_parser("psi", help="second characteristic as CSV"))
    p.add_argument("--ymax", type=float, default=50.0)
    p.add_argument("--samples", type=int, default=1024)
    p.add_argument("--out")
    p.set_defaults(func=cmd_psi)

    p = common(sub.add_parser("fracpow", help="fractional convolution power as CSV"))
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--route", choices=("auto", "series", "lattice", "grid"), default="auto")
    p.add_argument("--tol", type=float, default=1e-7, help="relative tolerance for the sign verdict")
    p.add_argument("--xmin", type=float)
    p.add_argument("--xmax", type=float)
    p.add_argument("--points", type=int, default=2001, help="samples for closed-form densities")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fracpow)

    p = common(sub.add_parser("member", help="decide whether t is in the divisibility set"))
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--method", choices=("density", "psd", "series", "grid"), default="density")
    p.add_argument("--tol", type=float)
    p.set_defaults(func=cmd_member)

    p = common(sub.add_parser("scan", help="scan t over a grid and estimate the divisibility parameters"))
    p.add_argument("--tmin", type=float, required=True)
    p.add_argument("--tmax", type=float, required=True)
    p.add_argument("--steps", type=int, required=True, help="number of grid points (integers are added)")
    p.add_argument("--method", choices=("density", "psd", "series", "grid"), default="density")
    p.add_argument("--tol", type=float)
    p.add_argument("--threads", type=int, help="worker threads (default: DIVISOR_THREADS, 0 = auto)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_scan)

    p = common(sub.add_parser("check", help="admissibility and invariant spot checks"))
    p.add_argument("--ymax", type=float, default=20.0)
    p.add_argument("--samples", type=int, default=1024)
    p.set_defaults(func=cmd_check)
    return parser


def run(argv=None, stdout=None) -> int:
    out = sys.stdout if stdout is None else stdout
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, out)
    except UsageError as exc:
        print(f"divisor: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, ValidationError) as exc:
        print(f"divisor: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivisorError as exc:
        print(f"divisor: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
