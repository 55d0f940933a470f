"""Command-line driver: ``evident <subcommand> [options]``.

Results go to stdout; with ``--out DIR`` they are also written to files
in DIR (temp file + rename, so readers never see a partial file).
Exit codes: 0 success, 1 usage error, 2 failed check under
``--expect-pass``.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from . import boundary, codes, extras, harness, scoring
from .algebra import MAX_DEPTH, validity_check
from .core import bernoulli
from .errors import EvidenceError
from .expr import ExprError, parse_process

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(args, stem: str, text: str, ext: str | None = None) -> None:
    if not text.endswith("\n"):
        text += "\n"
    sys.stdout.write(text)
    if args.out:
        write_atomic(Path(args.out) / f"{stem}.{ext or args.format or 'txt'}", text)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


def _check_exit(args, passed: bool) -> int:
    return EXIT_FAILED if (args.expect_pass and not passed) else EXIT_OK


# --------------------------------------------------------------------------
# subcommands


def cmd_table2(args) -> int:
    reps = args.reps or harness.REPS_TIERS[args.reps_tier]
    reports = harness.verify_table2(seed=args.seed, reps=reps)
    if args.format == "json":
        _emit(args, "table2", _dump([r.as_row() for r in reports]))
    else:
        _emit(args, "table2", boundary.reports_to_csv(reports), "csv")
    return EXIT_OK


def cmd_nml_horizon(args) -> int:
    hist = [int(c) for c in args.history.split(",")] if args.history else []
    t = len(hist) + 1
    rows = []
    for N in range(max(args.n_min, t), args.n_max + 1):
        q = codes.nml_horizon_conditional_exact(N, t, hist, args.x)
        rows.append({"N": N, "q": float(q), "numerator": q.numerator, "denominator": q.denominator})
    if args.format == "json":
        _emit(args, "nml_horizon", _dump(rows))
    else:
        lines = ["N,q,numerator,denominator"] + [
            f"{r['N']},{r['q']!r},{r['numerator']},{r['denominator']}" for r in rows
        ]
        _emit(args, "nml_horizon", "\n".join(lines), "csv")
    return EXIT_OK


def cmd_nml_constants(args) -> int:
    consts = {n: codes.nml_normalizer(n) for n in range(1, args.n + 1)}
    if args.format == "json":
        _emit(args, "nml_constants", _dump({str(n): str(c) for n, c in consts.items()}))
    elif args.format == "csv":
        lines = ["n,numerator,denominator,value"] + [
            f"{n},{c.numerator},{c.denominator},{float(c)!r}" for n, c in consts.items()
        ]
        _emit(args, "nml_constants", "\n".join(lines))
    else:
        _emit(args, "nml_constants", " ".join(f"{n}:{c}" for n, c in consts.items()), "txt")
    return EXIT_OK


LIFT_FAMILIES = {
    "nml": lambda d: codes.CodeLengthFamily.nml_sequence(d),
    "prequential-kt": lambda d: codes.CodeLengthFamily.prequential(d, "kt"),
    "prequential-laplace": lambda d: codes.CodeLengthFamily.prequential(d, "laplace"),
}


def cmd_liftability(args) -> int:
    report = codes.liftability_check(LIFT_FAMILIES[args.family](args.depth), args.depth)
    _emit(args, f"liftability_{args.family}", _dump(report.to_dict()), "json")
    return _check_exit(args, report.passed)


def cmd_experiment(args) -> int:
    run = {
        "accumulation": harness.experiment_accumulation,
        "type1": harness.experiment_type1,
        "misspec": harness.experiment_misspec,
    }[args.name]
    kwargs = {"seed": args.seed}
    if args.reps:
        kwargs["reps"] = args.reps
    result = run(**kwargs)
    _emit(args, f"experiment_{args.name}", result.to_json(), "json")
    if args.out:
        for arm in result.trajectories:
            write_atomic(Path(args.out) / f"trajectories_{args.name}_{arm}.csv", result.trajectories_csv(arm))
    return EXIT_OK


def cmd_scoring_decay(args) -> int:
    p1, p0 = bernoulli(args.p1), bernoulli(args.p0)
    curve = scoring.decay_curve(args.rule, p1, p0, args.n_max)
    if args.format == "json":
        _emit(args, "scoring_decay", _dump([{"n": n, "expected_evidence": float(v)}
                                            for n, v in enumerate(curve, start=1)]))
    else:
        _emit(args, "scoring_decay", scoring.decay_curve_csv(curve), "csv")
    return EXIT_OK


def cmd_conformal_check(args) -> int:
    scorer = extras.distance_to_bag_mean
    if args.test is not None:
        calib = [float(v) for v in args.calibration.split(",")] if args.calibration else []
        rep = extras.conformal_e_report(scorer, calib, float(args.test))
        _emit(args, "conformal_e_value", rep.to_json(), "json")
        return EXIT_OK
    labels = [float(v) for v in args.labels.split(",")]
    summary = extras.exhaustive_conformal_check(scorer, labels, args.max_size)
    summary["pass"] = summary["max_abs_deviation"] <= 1e-12
    _emit(args, "conformal_check", _dump(summary), "json")
    return _check_exit(args, summary["pass"])


def cmd_pacbayes_check(args) -> int:
    import numpy as np

    grid = tuple(bernoulli(float(p)) for p in np.linspace(0.1, 0.9, args.grid))
    prior = tuple([1.0 / args.grid] * args.grid)
    null = bernoulli(0.5)
    gen = harness.RngStream(args.seed, 0).generator()
    gaps = []
    for _ in range(args.instances):
        path = tuple(int(v) for v in gen.integers(0, 2, size=args.n))
        inst = extras.PacBayesInstance(grid, prior, null, path)
        for rule in (extras.prior_posterior, extras.argmax_posterior, extras.bayes_posterior):
            gaps.append(extras.pac_bayes_check(inst, rule(inst)).gap)
    expectations = {
        rule.__name__: extras.expected_exp_rhs(grid, prior, null, args.enum_length, rule)
        for rule in (extras.prior_posterior, extras.argmax_posterior, extras.bayes_posterior)
    }
    passed = min(gaps) >= -1e-10 and max(expectations.values()) <= 1.0 + 1e-10
    summary = {
        "instances": args.instances,
        "min_gap": min(gaps),
        "enum_length": args.enum_length,
        "expected_exp_rhs": expectations,
        "pass": passed,
    }
    _emit(args, "pacbayes_check", _dump(summary), "json")
    return _check_exit(args, passed)


def cmd_validity(args) -> int:
    if args.depth > MAX_DEPTH:
        raise EvidenceError(f"depth {args.depth} exceeds {MAX_DEPTH}")
    make = parse_process(args.spec, horizon=max(args.depth, 1))
    report = validity_check(make, bernoulli(args.null), args.depth)
    _emit(args, "validity", _dump(report.to_dict()), "json")
    return _check_exit(args, report.passed)


def cmd_sample_complexity(args) -> int:
    n = boundary.sample_complexity(args.alpha, args.mu)
    if args.format == "json":
        _emit(args, "sample_complexity", _dump({"alpha": args.alpha, "mu": args.mu, "n": n}))
    else:
        _emit(args, "sample_complexity", f"{n:.1f}", "txt")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--reps-tier", choices=sorted(harness.REPS_TIERS), default="smoke")
    common.add_argument("--reps", type=int, default=None, help="override the replication count")
    common.add_argument("--out", default=None, help="directory for output files")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--expect-pass", action="store_true",
                        help="exit 2 if the check fails")

    parser = _Parser(prog="evident", description="Sequential evidence toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("table2", parents=[common], help="crossing-time table")
    p.set_defaults(func=cmd_table2)

    p = sub.add_parser("nml-horizon", parents=[common], help="q_t^(N)(x | history) across horizons")
    p.add_argument("--n-min", type=int, default=2)
    p.add_argument("--n-max", type=int, default=7)
    p.add_argument("--history", default="0", help="comma-separated past symbols")
    p.add_argument("--x", type=int, default=0)
    p.set_defaults(func=cmd_nml_horizon)

    p = sub.add_parser("nml-constants", parents=[common], help="exact Shtarkov sums C_1..C_n")
    p.add_argument("--n", type=int, default=3)
    p.set_defaults(func=cmd_nml_constants)

    p = sub.add_parser("liftability", parents=[common], help="sub-probability check of a code family")
    p.add_argument("family", choices=sorted(LIFT_FAMILIES))
    p.add_argument("--depth", type=int, default=4)
    p.set_defaults(func=cmd_liftability)

    p = sub.add_parser("experiment", parents=[common], help="Monte Carlo experiments")
    p.add_argument("name", choices=("accumulation", "type1", "misspec"))
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("scoring-decay", parents=[common], help="expected scoring-rule evidence by n")
    p.add_argument("--rule", choices=sorted(scoring.RULES), default="brier")
    p.add_argument("--p1", type=float, default=0.75)
    p.add_argument("--p0", type=float, default=0.5)
    p.add_argument("--n-max", type=int, default=100)
    p.set_defaults(func=cmd_scoring_decay)

    p = sub.add_parser("conformal-check", parents=[common], help="exhaustive conformal e-value validity")
    p.add_argument("--labels", default="0,1,2")
    p.add_argument("--max-size", type=int, default=5)
    p.add_argument("--calibration", default=None)
    p.add_argument("--test", default=None, help="compute one e-value for this test point")
    p.set_defaults(func=cmd_conformal_check)

    p = sub.add_parser("pacbayes-check", parents=[common], help="Donsker-Varadhan gap and validity")
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--grid", type=int, default=5)
    p.add_argument("--enum-length", type=int, default=8)
    p.set_defaults(func=cmd_pacbayes_check)

    p = sub.add_parser("validity", parents=[common], help="enumerative supermartingale check")
    p.add_argument("spec", help="process expression, e.g. 'mix(0.5:lr(0.65,0.5), 0.5:lr(0.35,0.5))'")
    p.add_argument("--depth", type=int, default=5)
    p.add_argument("--null", type=float, default=0.5)
    p.set_defaults(func=cmd_validity)

    p = sub.add_parser("sample-complexity", parents=[common], help="log(1/alpha)/mu")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.set_defaults(func=cmd_sample_complexity)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ExprError, EvidenceError, ValueError) as exc:
        print(f"evident: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
