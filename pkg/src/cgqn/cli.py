"""Command-line front end: ``cgqn generate``, ``cgqn race`` and ``cgqn verify``.

Exit codes: 0 success, 1 a check did not pass, 2 usage or validation error,
3 scheme breakdown during a race.
"""

import argparse
import csv
import io
import json
import logging
import os
import sys

import numpy as np

from .cg import cg_run
from .errors import CgqnError, InvalidScheme, ProblemError, SchemeBreakdown
from .problem import SpectrumSpec, atomic_write_text, load_problem, random_spd_problem, save_problem
from .qn import BroydenFamily, GeneralRankOne, RankOneForDelta, Sr1Secant, WBased, qn_run
from .report import build_report
from .verify import BATTERIES, run_batteries

log = logging.getLogger("cgqn")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_BREAKDOWN = 3

SCHEMES = ("broyden", "sr1", "rank1", "delta1", "w-identity", "w-prev")
CSV_COLUMNS = (
    "k",
    "delta_measured",
    "delta_predicted",
    "angle_residual",
    "w_residual",
    "u_residual",
    "assumption_residual",
    "grad_norm",
)


class UsageError(Exception):
    """Invalid flag values detected after argparse."""


def configure_logging():
    level = os.environ.get("CGQN_LOG", "error").upper()
    if level not in ("ERROR", "INFO", "DEBUG"):
        level = "ERROR"
    logging.basicConfig(stream=sys.stderr, level=getattr(logging, level), format="%(levelname)s %(name)s: %(message)s")


def parse_floats(text, flag):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{flag}: expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise UsageError(f"{flag}: no values given")
    return values


def parse_alphas(text):
    pairs = []
    for item in text.split(","):
        parts = item.split(":")
        if len(parts) != 2:
            raise UsageError(f"--alphas: expected a:b pairs, got {item!r}")
        try:
            pairs.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise UsageError(f"--alphas: expected numbers in {item!r}") from None
    return pairs


def make_scheme(args):
    """UpdateScheme from the --scheme flag and its parameter schedule."""
    name = args.scheme
    try:
        if name == "broyden":
            phis = parse_floats(args.phi, "--phi") if args.phi is not None else [0.0]
            return BroydenFamily(phis)
        if name == "sr1":
            return Sr1Secant()
        if name == "rank1":
            if args.alphas is None:
                raise UsageError("--scheme rank1 requires --alphas a:b[,a:b...]")
            return GeneralRankOne(parse_alphas(args.alphas))
        if name == "delta1":
            if args.delta is None:
                raise UsageError("--scheme delta1 requires --delta")
            return RankOneForDelta(parse_floats(args.delta, "--delta"))
        return WBased("identity" if name == "w-identity" else "previous")
    except InvalidScheme as exc:
        raise UsageError(str(exc)) from None


def spectrum_from_args(args):
    """SpectrumSpec from --eigs or --n/--cond; None when neither is given."""
    if args.eigs is not None:
        eigs = parse_floats(args.eigs, "--eigs")
        if args.n is not None and args.n != len(eigs):
            raise UsageError(f"--n {args.n} does not match {len(eigs)} eigenvalues")
        if args.cond is not None:
            raise UsageError("give either --eigs or --cond, not both")
        return SpectrumSpec(tuple(sorted(eigs)), args.seed)
    if args.n is None and args.cond is None:
        return None
    if args.n is None or args.n < 1:
        raise UsageError("--n must be a positive integer")
    return SpectrumSpec.log_spaced(args.n, args.cond if args.cond is not None else 1.0, args.seed)


def load_source(args):
    spec = spectrum_from_args(args)
    if args.problem is not None and spec is not None:
        raise UsageError("give either --problem or spectrum flags, not both")
    if args.problem is not None:
        return load_problem(args.problem)
    if spec is None:
        raise UsageError("a problem source is required: --problem PATH or --eigs/--n/--cond")
    return random_spd_problem(spec)


def fmt(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def report_csv(report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in report.as_dicts():
        writer.writerow([fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def dump_json(data):
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def cmd_generate(args):
    spec = spectrum_from_args(args)
    if spec is None:
        raise UsageError("generate needs --eigs or --n/--cond")
    qp = random_spd_problem(spec)
    path = os.path.join(args.out, "problem.json")
    save_problem(qp, path)
    print(f"n={qp.n} cond={spec.condition:.17g} seed={spec.seed} -> {path}")
    return EXIT_OK


def cmd_race(args):
    scheme = make_scheme(args)
    qp = load_source(args)
    g0 = float(np.linalg.norm(qp.H @ qp.x0 + qp.c))
    tol = args.tol * max(1.0, g0)
    cg = cg_run(qp, tol=tol, max_iter=args.max_iter)
    qn = qn_run(qp, scheme, tol=tol, max_iter=args.max_iter)
    report = build_report(cg, qn, scheme, qp.H)
    summary = report.summary()
    summary["n"] = qp.n
    summary["tol"] = tol
    atomic_write_text(os.path.join(args.out, "race.csv"), report_csv(report))
    atomic_write_text(os.path.join(args.out, "summary.json"), dump_json(summary))
    print(f"{scheme.name}: verdict {report.verdict} (r_cg={report.r_cg}, r_qn={report.r_qn})")
    if isinstance(qn.failure, SchemeBreakdown):
        print(f"breakdown: {type(qn.failure).__name__}: {qn.failure}", file=sys.stderr)
        return EXIT_BREAKDOWN
    return EXIT_OK if report.parallel else EXIT_CHECK_FAILED


def cmd_verify(args):
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    only = None
    if args.property is not None:
        if args.property not in BATTERIES:
            raise UsageError(f"unknown property {args.property!r}; choose from {', '.join(BATTERIES)}")
        only = [args.property]
    results = run_batteries(args.trials, args.seed, n=args.n, only=only)
    report = {
        "seed": args.seed,
        "trials": args.trials,
        "n": args.n,
        "passed": all(r.passed for r in results.values()),
        "properties": {name: r.as_dict() for name, r in results.items()},
    }
    atomic_write_text(os.path.join(args.out, "verify.json"), dump_json(report))
    for name, r in results.items():
        print(f"{'PASS' if r.passed else 'FAIL'} {name} ({r.trials} trials, {r.failures} failed, {r.skipped} skipped)")
    return EXIT_OK if report["passed"] else EXIT_CHECK_FAILED


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--n", type=int)

    spectrum = argparse.ArgumentParser(add_help=False)
    spectrum.add_argument("--eigs", help="comma-separated eigenvalues")
    spectrum.add_argument("--cond", type=float, help="condition number of a log-spaced spectrum")

    parser = argparse.ArgumentParser(prog="cgqn", description="CG versus quasi-Newton parallelism checks on quadratics")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("generate", parents=[common, spectrum], help="write a random SPD problem to problem.json")

    race = sub.add_parser("race", parents=[common, spectrum], help="run CG and a QN scheme side by side")
    race.add_argument("--problem", help="problem JSON file")
    race.add_argument("--scheme", choices=SCHEMES, default="broyden")
    race.add_argument("--phi", help="Broyden parameter(s), comma-separated per iteration")
    race.add_argument("--alphas", help="rank-one parameters a:b[,a:b...] per iteration")
    race.add_argument("--delta", help="target scaling(s) for delta1")
    race.add_argument("--tol", type=float, default=1e-10, help="stop when ||g|| <= tol * max(1, ||g_0||)")
    race.add_argument("--max-iter", type=int)

    verify = sub.add_parser("verify", parents=[common], help="run the randomized property batteries")
    verify.add_argument("--trials", type=int, default=100)
    verify.add_argument("--property", help="run a single battery")
    return parser


VALUE_FLAGS = ("--eigs", "--phi", "--alphas", "--delta")


def join_value_flags(argv):
    """Rewrite ``--eigs -1,2`` as ``--eigs=-1,2`` so argparse keeps negative lists."""
    out = []
    it = iter(argv)
    for arg in it:
        if arg in VALUE_FLAGS:
            value = next(it, None)
            out.append(arg if value is None else f"{arg}={value}")
        else:
            out.append(arg)
    return out


COMMANDS = {"generate": cmd_generate, "race": cmd_race, "verify": cmd_verify}


def main(argv=None):
    configure_logging()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(join_value_flags(argv))
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ProblemError, InvalidScheme, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CgqnError as exc:
        print(f"breakdown: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_BREAKDOWN


if __name__ == "__main__":
    sys.exit(main())
