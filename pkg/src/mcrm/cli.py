"""Command-line interface: ``mcrm {solve,front,profile,verify,logreg}``."""

import argparse
import json
import os
import sys

import numpy as np

from . import harness as Hn
from . import problems as P
from .driver import (McrmConfig, preset, trace_from_json, trace_to_csv, trace_to_json,
                     verify_trace)
from .errors import McrmError


def read_config_file(path):
    """``key = value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key] = value
    return out


def _floats(text):
    return np.array([float(v) for v in text.split(",")])


def build_config(args, mode=None):
    mode = mode or getattr(args, "mode", None) or "exact"
    config = preset(mode)
    overrides = {}
    if args.config:
        overrides.update(read_config_file(args.config))
    for key in ("beta", "theta", "sigma1", "alpha", "max_outer", "h_floor"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return McrmConfig.from_dict(overrides, base=config) if overrides else config


def _problem(parser, name):
    try:
        return P.get_problem(name)
    except KeyError:
        parser.error(f"unknown problem {name!r}; registered problems: {', '.join(P.problem_names())}")


def _outdir(args):
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def cmd_solve(args, parser):
    problem = _problem(parser, args.problem)
    config = build_config(args)
    if args.x0 is not None:
        x0 = _floats(args.x0)
        if x0.size != problem.n:
            parser.error(f"--x0 needs {problem.n} values")
    elif args.eta is not None:
        x0 = P.make_start(problem, args.eta)
    else:
        x0 = Hn.draw_start(problem, Hn.start_rng(args.seed, problem.name, 0))
    result, _, secs = Hn.solve_from(problem, config, x0)
    if not result.trace:
        print(f"status={result.status} T=0 (objectives not finite at the second start point)")
        return 1
    out = _outdir(args)
    stem = os.path.join(out, f"{problem.name}_{args.mode}")
    trace_to_json(result, stem + "_trace.json")
    trace_to_csv(result, stem + "_trace.csv")
    r = result.final
    print(f"status={result.status} T={result.outer_iterations} g_norm={r.g_norm:.6e} "
          f"evals_f={r.evals_f} evals_g={r.evals_g} time={secs:.3f}s")
    x, lam, g = result.certificate
    print("certificate: x=[" + ", ".join("%.10g" % v for v in x) + "] lambda=["
          + ", ".join("%.6g" % v for v in lam) + f"] g_norm={g:.6e}")
    return 0 if result.status == "converged" else 1


def cmd_front(args, parser):
    problem = _problem(parser, args.problem)
    config = build_config(args)
    spec = Hn.CampaignSpec([problem.name], args.starts, args.seed, {args.mode: config})
    rows = Hn.run_campaign(spec, jobs=args.jobs)
    front = Hn.front_from_rows(rows)
    if not front:
        statuses = ", ".join(f"{r['seed']}:{r['status']}" for r in rows)
        print(f"all runs failed: {statuses}", file=sys.stderr)
        return 1
    out = _outdir(args)
    path = os.path.join(out, f"{problem.name}_{args.mode}_front.csv")
    frows = Hn.front_rows(front)
    Hn.write_csv(path, list(frows[0]), frows)
    solved = sum(r["status"] == "converged" for r in rows)
    print(f"{problem.name}: {solved}/{len(rows)} converged, {len(front)} front points -> {path}")
    return 0


def cmd_profile(args, parser):
    names = [n for n in (args.problems or "").split(",") if n]
    if not names:
        parser.error("--problems needs at least one problem name")
    for n in names:
        _problem(parser, n)
    modes = [m for m in args.modes.split(",") if m]
    configs = {m: build_config(args, m) for m in modes}
    spec = Hn.CampaignSpec(names, args.starts, args.seed, configs)
    rows = Hn.run_campaign(spec, jobs=args.jobs)
    out = _outdir(args)
    inst = os.path.join(out, "instances.csv")
    header = ["problem", "config", "seed", "status", "outer_iters", "f_evals", "g_evals",
              "wall_time"]
    Hn.write_csv(inst, header, rows)
    prof_rows = []
    for metric in ("outer_iters", "f_evals", "g_evals", "wall_time"):
        prof_rows += Hn.profile_table(rows, metric)
    prof = os.path.join(out, "profile.csv")
    Hn.write_csv(prof, ["metric", "tau"] + sorted(configs), prof_rows)
    for m in sorted(configs):
        solved = sum(r["status"] == "converged" for r in rows if r["config"] == m)
        total = sum(r["config"] == m for r in rows)
        print(f"{m}: {solved}/{total} converged")
    print(f"wrote {inst} and {prof}")
    return 0


def cmd_verify(args, parser):
    try:
        result = trace_from_json(args.trace)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    kappas = None
    if args.kappa_g is not None or args.kappa_h is not None:
        kappas = (args.kappa_g or 0.0, args.kappa_h or 0.0)
    f_lower = _floats(args.f_lower) if args.f_lower else None
    report = verify_trace(result, L=args.L, kappas=kappas, f_lower=f_lower, theta=args.theta)
    failed = False
    for name, entry in report.items():
        if name == "rates":
            continue
        failed |= entry["status"] == "fail"
        print(f"{name:18s} {entry['status'].upper():8s} {entry['detail']}")
    tail = report["rates"][-3:]
    print("rates g_{t+1}/g_t^2 (last 3): " + ", ".join("%.3g" % v for v in tail))
    path = os.path.join(_outdir(args), os.path.splitext(os.path.basename(args.trace))[0]
                        + "_report.json")
    with open(path, "w") as fh:
        json.dump(report, fh, indent=1)
    print(f"report -> {path}")
    return 1 if failed else 0


def cmd_logreg(args, parser):
    if args.data:
        try:
            data = P.load_logistic_csv(args.data, label_col=args.label_col, header=args.header,
                                       train_count=args.train_count,
                                       positive_label=args.positive_label)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    elif args.synthetic:
        data = P.synthetic_logistic(seed=args.seed)
    else:
        parser.error("logreg needs --data PATH or --synthetic")
    config = build_config(args, "df")
    front, runs = Hn.logistic_study(data, config, args.starts, seed=args.seed, jobs=args.jobs)
    if not front:
        print("all runs failed: " + ", ".join(f"{r['seed']}:{r['status']}" for r in runs),
              file=sys.stderr)
        return 1
    out = _outdir(args)
    path = os.path.join(out, "logreg_front.csv")
    rows = Hn.front_rows(front)
    Hn.write_csv(path, list(rows[0]), rows)
    print(f"{len(front)} front points from {len(runs)} runs -> {path}")
    print(f"{'role':8s} {'F1':>12s} {'F2':>12s} {'train':>7s} {'test':>7s}")
    for p in front:
        role = p.extra["role"] or ("knee" if p.extra["knee"] else "")
        if role:
            print(f"{role:8s} {p.f[0]:12.6g} {p.f[1]:12.6g} {p.extra['train_accuracy']:7.3f} "
                  f"{p.extra['test_accuracy']:7.3f}")
    return 0


def make_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS,
                        help="key = value file with configuration overrides")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")

    parser = argparse.ArgumentParser(prog="mcrm", description=__doc__, parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    def tuning(p):
        p.add_argument("--mode", choices=["exact", "inexact", "df"], default="exact")
        p.add_argument("--beta", type=float)
        p.add_argument("--theta", type=float)
        p.add_argument("--sigma1", type=float)
        p.add_argument("--alpha", type=float)
        p.add_argument("--max-outer", dest="max_outer", type=int)
        p.add_argument("--h-floor", dest="h_floor", type=float)

    p = sub.add_parser("solve", parents=[common], help="run the method once")
    p.add_argument("--problem", required=True)
    p.add_argument("--eta", type=float, help="scalar start parameter in (0, 1)")
    p.add_argument("--x0", help="comma-separated start point")
    tuning(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("front", parents=[common], help="multi-start Pareto front")
    p.add_argument("--problem", required=True)
    p.add_argument("--starts", type=int, default=100)
    tuning(p)
    p.set_defaults(func=cmd_front)

    p = sub.add_parser("profile", parents=[common], help="campaign and performance profiles")
    p.add_argument("--problems", required=True, help="comma-separated names")
    p.add_argument("--starts", type=int, default=10)
    p.add_argument("--modes", default="exact,df", help="comma-separated configurations")
    tuning(p)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("verify", parents=[common], help="re-check a JSON trace")
    p.add_argument("trace")
    p.add_argument("--L", type=float)
    p.add_argument("--kappa-g", dest="kappa_g", type=float)
    p.add_argument("--kappa-h", dest="kappa_h", type=float)
    p.add_argument("--f-lower", dest="f_lower", help="comma-separated objective lower bounds")
    p.add_argument("--theta", type=float)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("logreg", parents=[common], help="logistic-regression trade-off study")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--data", help="CSV file")
    src.add_argument("--synthetic", action="store_true")
    p.add_argument("--label-col", dest="label_col", type=int, default=-1)
    p.add_argument("--header", action="store_true")
    p.add_argument("--positive-label", dest="positive_label")
    p.add_argument("--train-count", dest="train_count", type=int)
    p.add_argument("--starts", type=int, default=300)
    tuning(p)
    p.set_defaults(func=cmd_logreg, mode="df")
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    for key, default in (("config", None), ("seed", 0), ("jobs", 1), ("out", None)):
        if not hasattr(args, key):
            setattr(args, key, default)
    try:
        return args.func(args, parser)
    except (McrmError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
