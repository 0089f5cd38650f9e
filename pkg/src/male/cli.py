"""Command-line interface.

Subcommands:
  quad         print the nodes and weights of a rule as CSV
  estimate     fit a model to a dataset file, print a JSON report
  convergence  error-vs-rule-size study, written to CSV
  experiment   run a configured benchmark study into a directory
  config       print a default experiment config as JSON
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .diagnostics import error_curve
from .estimator import MalProblem, maximize
from .experiments import (
    EXPERIMENT_NAMES,
    ExperimentConfig,
    default_config,
    run_experiment,
)
from .models import get_model, load_dataset
from .quadrature import METHOD_ALIASES, gaussian_rule
from .rng import DEFAULT_SEED

_FAMILIES = {
    "hermite": "gh", "legendre": "gl", "midpoint": "midpoint",
    "mc": "mc", "halton": "halton", "mlhs": "mlhs", "sparse": "sparse",
}


def parse_rule_spec(spec: str, d: int = 1):
    """Rule specs look like 'gh:16', 'mc:100:seed=7', 'sparse:3:d=2'."""
    parts = spec.split(":")
    family = parts[0]
    if family not in METHOD_ALIASES:
        raise ValueError(f"unknown rule family {family!r}")
    if len(parts) < 2:
        raise ValueError("rule spec needs a size, e.g. 'gh:16'")
    r = int(parts[1])
    kw = {"d": d, "seed": 0, "skip": 1}
    for item in parts[2:]:
        key, _, val = item.partition("=")
        if key not in ("d", "seed", "skip", "level"):
            raise ValueError(f"unknown rule option {key!r}")
        kw[key] = int(val)
    level = kw.pop("level", None)
    return gaussian_rule(family, r, level=level, **kw)


def _cmd_quad(args) -> int:
    fam = _FAMILIES[args.family]
    if fam == "sparse":
        rule = gaussian_rule("sparse", args.r, d=args.d, level=args.level or args.r)
    else:
        rule = gaussian_rule(fam, args.r, d=args.d, seed=args.seed, skip=args.skip)
    d = rule.d
    header = ["index"] + [f"node_{j + 1}" for j in range(d)] + ["weight"]
    print(",".join(header))
    for i in range(rule.r):
        cells = [str(i)]
        cells += [f"{x:.17g}" for x in rule.points[i]]
        cells.append(f"{rule.weights[i]:.17g}")
        print(",".join(cells))
    return 0


def _cmd_estimate(args) -> int:
    model = get_model(args.model, d=args.d, T=args.T)
    data = load_dataset(args.data)
    rule = parse_rule_spec(args.rule, d=model.dim_v)
    theta0 = np.array([float(t) for t in args.theta0.split(",")])
    problem = MalProblem(model, data, rule)
    est = maximize(problem, theta0, tol=args.tol)
    report = {
        "theta_hat": [float(t) for t in est.theta_hat],
        "std_errors": [float(s) for s in est.std_errors],
        "loglik": est.loglik,
        "score_norm": est.score_norm,
        "iterations": est.iterations,
        "converged": bool(est.converged),
        "floor_activations": est.floor_activations,
        "rule_spec": args.rule,
        "seed": args.seed,
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _cmd_convergence(args) -> int:
    model = get_model(args.model, d=args.d, T=args.T)
    methods = [m.strip() for m in args.methods.split(",")]
    r_values = [int(r) for r in args.r.split(",")]
    rows = []
    agg = []
    for method in methods:
        report = error_curve(
            model, method, r_values, reps=args.reps, base_seed=args.seed, k=0
        )
        for i, r in enumerate(report.r_values):
            for rep, err in enumerate(report.per_rep_sup[i]):
                rows.append((args.model, method, r, rep, err))
            agg.append((
                args.model, method, r,
                max(report.per_rep_sup[i]), report.rmse[i],
            ))
    with open(args.out, "w") as fh:
        fh.write("model,method,r,rep,abs_error\n")
        for model_name, method, r, rep, err in rows:
            fh.write(f"{model_name},{method},{r},{rep},{err:.17g}\n")
    agg_path = args.out.rsplit(".", 1)[0] + ".aggregate.csv"
    with open(agg_path, "w") as fh:
        fh.write("model,method,r,max_abs_error,rmse\n")
        for model_name, method, r, mx, rmse in agg:
            fh.write(f"{model_name},{method},{r},{mx:.17g},{rmse:.17g}\n")
    print(f"wrote {args.out} and {agg_path}")
    return 0


def _cmd_experiment(args) -> int:
    if args.config == "-":
        payload = json.load(sys.stdin)
    else:
        with open(args.config) as fh:
            payload = json.load(fh)
    cfg = ExperimentConfig.from_json(payload)
    out = run_experiment(cfg, args.out, reps=args.reps, seed=args.seed)
    print(
        f"wrote {out['n_results']} result rows and {out['n_aggregates']} "
        f"aggregate rows to {args.out} in {out['wall_seconds']:.1f}s"
    )
    return 0


def _cmd_config(args) -> int:
    cfg = default_config(args.experiment)
    text = json.dumps(cfg.to_json(), indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="male",
        description="maximum approximated likelihood estimation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    quad = sub.add_parser("quad", help="print rule nodes/weights as CSV")
    quad.add_argument("--family", required=True, choices=sorted(_FAMILIES))
    quad.add_argument("--r", type=int, required=True)
    quad.add_argument("--d", type=int, default=1)
    quad.add_argument("--seed", type=int, default=0)
    quad.add_argument("--skip", type=int, default=1)
    quad.add_argument("--level", type=int, default=None)
    quad.set_defaults(func=_cmd_quad)

    est = sub.add_parser("estimate", help="fit a model to a dataset")
    est.add_argument("--model", required=True)
    est.add_argument("--data", required=True)
    est.add_argument("--rule", required=True, help="e.g. gh:16 or mc:100:seed=7")
    est.add_argument("--theta0", required=True, help="comma-separated start")
    est.add_argument("--tol", type=float, default=1e-8)
    est.add_argument("--seed", type=int, default=DEFAULT_SEED)
    est.add_argument("--d", type=int, default=2)
    est.add_argument("--T", type=int, default=3)
    est.set_defaults(func=_cmd_estimate)

    conv = sub.add_parser("convergence", help="error-vs-r study to CSV")
    conv.add_argument("--model", required=True)
    conv.add_argument("--methods", required=True, help="comma-separated families")
    conv.add_argument("--r", required=True, help="comma-separated rule sizes")
    conv.add_argument("--reps", type=int, default=500)
    conv.add_argument("--seed", type=int, default=DEFAULT_SEED)
    conv.add_argument("--out", required=True)
    conv.add_argument("--d", type=int, default=2)
    conv.add_argument("--T", type=int, default=3)
    conv.set_defaults(func=_cmd_convergence)

    exp = sub.add_parser("experiment", help="run a configured study")
    exp.add_argument("--config", required=True, help="config JSON path or '-'")
    exp.add_argument("--reps", type=int, default=None)
    exp.add_argument("--seed", type=int, default=None)
    exp.add_argument("--out", required=True)
    exp.set_defaults(func=_cmd_experiment)

    cfg = sub.add_parser("config", help="print a default experiment config")
    cfg.add_argument("--experiment", required=True, choices=EXPERIMENT_NAMES)
    cfg.add_argument("--out", default=None)
    cfg.set_defaults(func=_cmd_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
