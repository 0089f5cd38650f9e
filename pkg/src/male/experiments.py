"""The four benchmark studies, end to end.

Each runner turns a JSON-serializable config into two CSV tables: per-rep
rows in ``results.csv`` and one aggregate row per setting in
``aggregate.csv``, plus a ``meta.json`` echoing the config.  Identical
config and base seed reproduce the CSVs byte for byte; wall time lives only
in the metadata.

smooth_convergence   per repetition, one fresh (y, x) record evaluated at
                     theta = 0; approximation error of every method and rule
                     size against a 100-point Gauss-Hermite reference.
ars_convergence      same harness on the indicator benchmark with the
                     error-function value as exact reference.
link_scaling         sqrt(n) * E(R(n)) for the four plain link kinds; the
                     error proxy is measured at the process's true theta
                     (the convergence studies' evaluation point) over a
                     fixed record probe set.
rmse_fixed_n         estimator RMSE at fixed sample sizes: fresh datasets
                     per repetition, fitted per method and rule size, with
                     the sampling-error floor from a 100-point reference
                     fit of the same datasets.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .diagnostics import ProbeSet, error_curve, reference_rule
from .errors import ExperimentFailure
from .estimator import MalProblem, maximize
from .link import LinkFunction, evaluate as link_evaluate
from .models import default_true_theta, generate_dataset, get_model
from .quadrature import gaussian_rule, is_stochastic, rule_nodes
from .rng import DEFAULT_SEED, derive_seed

__all__ = [
    "ExperimentConfig",
    "default_config",
    "run_experiment",
    "run_smooth_convergence",
    "run_ars_convergence",
    "run_link_scaling",
    "run_rmse_fixed_n",
    "EXPERIMENT_NAMES",
]

EXPERIMENT_NAMES = (
    "smooth_convergence",
    "ars_convergence",
    "link_scaling",
    "rmse_fixed_n",
)

_R_GRID = tuple(16 * 2**k for k in range(11))  # 16 .. 16384
REFERENCE_SIZE = 100


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete description of one run; round-trips through JSON losslessly."""

    experiment: str
    model: str
    methods: tuple = ()
    r_values: tuple = ()
    links: tuple = ()
    n_values: tuple = ()
    reps: int = 500
    base_seed: int = DEFAULT_SEED
    probe_records: int = 200
    out_dir: str = ""

    def __post_init__(self):
        if self.experiment not in EXPERIMENT_NAMES:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "r_values", tuple(int(r) for r in self.r_values))
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        links = tuple(
            l if isinstance(l, LinkFunction) else LinkFunction.from_json(l)
            for l in self.links
        )
        object.__setattr__(self, "links", links)
        if any(b <= a for a, b in zip(self.r_values, self.r_values[1:])):
            raise ValueError("r_values must be strictly increasing")

    def to_json(self) -> dict:
        return {
            "experiment": self.experiment,
            "model": self.model,
            "methods": list(self.methods),
            "r_values": list(self.r_values),
            "links": [l.to_json() for l in self.links],
            "n_values": list(self.n_values),
            "reps": self.reps,
            "base_seed": self.base_seed,
            "probe_records": self.probe_records,
            "out_dir": self.out_dir,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "ExperimentConfig":
        return cls(**payload)


def default_config(experiment: str) -> ExperimentConfig:
    """Paper-recipe defaults; pass ``reps`` overrides for desk-scale runs."""
    if experiment == "smooth_convergence":
        return ExperimentConfig(
            experiment, "rc_regression",
            methods=("mc", "halton", "mlhs", "gh", "gl", "midpoint"),
            r_values=_R_GRID, reps=5000,
        )
    if experiment == "ars_convergence":
        return ExperimentConfig(
            experiment, "ars_normal_cdf",
            methods=("mc", "halton", "gl", "gh"),
            r_values=_R_GRID, reps=5000,
        )
    if experiment == "link_scaling":
        # the logarithmic coefficient follows the sufficiency rule
        # r >= (gamma/alpha) log n: gamma = 0.6 over the pre-asymptotic
        # Gauss-Hermite rate alpha ~ 0.1 measured on the sup-probe set
        return ExperimentConfig(
            experiment, "rc_regression",
            methods=("mc", "halton", "gh"),
            links=(
                LinkFunction("constant", a=8),
                LinkFunction("logarithmic", a=6),
                LinkFunction("sqrt", a=1),
                LinkFunction("linear", a=1),
            ),
            n_values=(64, 256, 1024, 4096, 16384),
            reps=5,
        )
    if experiment == "rmse_fixed_n":
        return ExperimentConfig(
            experiment, "rc_regression",
            methods=("mc", "gh"),
            r_values=(2, 4, 8, 16, 32, 64, 128),
            n_values=(50, 5000),
            reps=2000,
        )
    raise ValueError(f"unknown experiment {experiment!r}")


# ---------------------------------------------------------------------------
# Convergence experiments (smooth and ARS)
# ---------------------------------------------------------------------------


def _convergence_rows(cfg: ExperimentConfig, integrand, ref_values, Z, theta):
    """Shared harness: per-rep absolute errors per (method, r)."""
    m = cfg.reps
    results = []
    aggregates = []
    for method in cfg.methods:
        for r in cfg.r_values:
            if is_stochastic(method):
                errs = np.empty(m)
                for rep in range(m):
                    seed = derive_seed(cfg.base_seed, "rule", method, r, rep)
                    rule = gaussian_rule(method, r, seed=seed)
                    phi = integrand.eval(rule_nodes(rule), Z[rep], theta)
                    errs[rep] = abs(float(phi @ rule.weights) - ref_values[rep])
            else:
                rule = gaussian_rule(method, r)
                phi = integrand.eval(rule_nodes(rule), Z, theta)
                errs = np.abs(phi @ rule.weights - ref_values)
            for rep in range(m):
                results.append({
                    "model": cfg.model, "method": method, "r": r,
                    "rep": rep, "abs_error": float(errs[rep]),
                })
            aggregates.append({
                "model": cfg.model, "method": method, "r": r,
                "max_abs_error": float(errs.max()),
                "rmse": float(np.sqrt(np.mean(errs**2))),
            })
    return results, aggregates


def run_smooth_convergence(cfg: ExperimentConfig):
    """Approximation error of the smooth regression contribution at theta = 0."""
    if cfg.experiment != "smooth_convergence" or cfg.model != "rc_regression":
        raise ValueError("config does not describe a smooth-convergence run")
    integrand = get_model(cfg.model)
    theta = np.zeros(1)
    records = np.vstack([
        generate_dataset(cfg.model, 1, derive_seed(cfg.base_seed, "data", rep),
                         (0.0,)).records
        for rep in range(cfg.reps)
    ])
    reference = reference_rule(integrand, REFERENCE_SIZE)
    phi = integrand.eval(rule_nodes(reference), records, theta)
    ref_values = phi @ reference.weights
    return _convergence_rows(cfg, integrand, ref_values, records, theta)


def run_ars_convergence(cfg: ExperimentConfig):
    """Approximation error of the indicator benchmark, exact reference."""
    if cfg.experiment != "ars_convergence" or cfg.model != "ars_normal_cdf":
        raise ValueError("config does not describe an ARS-convergence run")
    integrand = get_model(cfg.model)
    records = np.vstack([
        generate_dataset(cfg.model, 1, derive_seed(cfg.base_seed, "data", rep),
                         ()).records
        for rep in range(cfg.reps)
    ])
    ref_values = integrand.exact_f(records[:, 0])
    return _convergence_rows(cfg, integrand, ref_values, records, None)


# ---------------------------------------------------------------------------
# Link scaling
# ---------------------------------------------------------------------------


def run_link_scaling(cfg: ExperimentConfig):
    """sqrt(n) * E(R(n)) per link and method.

    E is the sup error (value and first theta-derivative) over a fixed
    record probe set at the process's true parameter, matching the
    evaluation point of the convergence studies.
    """
    if cfg.experiment != "link_scaling":
        raise ValueError("config does not describe a link-scaling run")
    integrand = get_model(cfg.model)
    theta0 = default_true_theta(cfg.model)
    records = generate_dataset(
        cfg.model, cfg.probe_records,
        derive_seed(cfg.base_seed, "probes"), theta0,
    ).records
    probes = ProbeSet(
        records, theta0.reshape(1, -1),
        f"{cfg.probe_records} records from the {cfg.model} process "
        f"at the true parameter",
    )
    max_r = max(
        link_evaluate(link, n) for link in cfg.links for n in cfg.n_values
    )
    k = 1 if integrand.has_derivatives else 0
    reference = reference_rule(integrand, max(REFERENCE_SIZE, max_r + 1))
    cache = {}
    results, aggregates = [], []
    for link in cfg.links:
        for method in cfg.methods:
            for n in cfg.n_values:
                r = link_evaluate(link, n)
                key = (method, r)
                if key not in cache:
                    rep = error_curve(
                        integrand, method, [r], probes=probes,
                        reference=reference, k=k, reps=cfg.reps,
                        base_seed=cfg.base_seed,
                    )
                    cache[key] = (rep.sup_error[0], rep.per_rep_sup[0])
                sup, per_rep = cache[key]
                for rep_idx, val in enumerate(per_rep):
                    results.append({
                        "model": cfg.model, "link": link.label, "method": method,
                        "n": n, "r": r, "rep": rep_idx, "sup_error": val,
                    })
                aggregates.append({
                    "model": cfg.model, "link": link.label, "method": method,
                    "n": n, "r": r,
                    "scaled_error": float(np.sqrt(n) * sup),
                })
    return results, aggregates


# ---------------------------------------------------------------------------
# Estimator RMSE at fixed n
# ---------------------------------------------------------------------------


def run_rmse_fixed_n(cfg: ExperimentConfig):
    """RMSE of the fitted coefficient against rule size, with the
    sampling-error floor from reference-rule fits of the same datasets."""
    if cfg.experiment != "rmse_fixed_n" or cfg.model != "rc_regression":
        raise ValueError("config does not describe an rmse-fixed-n run")
    integrand = get_model(cfg.model)
    theta0 = np.zeros(1)
    reference = reference_rule(integrand, REFERENCE_SIZE)
    det_rules = {
        (method, r): gaussian_rule(method, r)
        for method in cfg.methods for r in cfg.r_values
        if not is_stochastic(method)
    }
    results, aggregates = [], []
    for n in cfg.n_values:
        fits = {(method, r): [] for method in cfg.methods for r in cfg.r_values}
        fits[("floor", REFERENCE_SIZE)] = []
        for rep in range(cfg.reps):
            data = generate_dataset(
                cfg.model, n, derive_seed(cfg.base_seed, "data", n, rep), (0.0,)
            )
            jobs = [("floor", REFERENCE_SIZE, reference)]
            for method in cfg.methods:
                for r in cfg.r_values:
                    if is_stochastic(method):
                        seed = derive_seed(cfg.base_seed, "rule", method, r, n, rep)
                        rule = gaussian_rule(method, r, seed=seed)
                    else:
                        rule = det_rules[(method, r)]
                    jobs.append((method, r, rule))
            for method, r, rule in jobs:
                est = maximize(MalProblem(integrand, data, rule), theta0)
                fits[(method, r)].append((float(est.theta_hat[0]), est.converged))
                results.append({
                    "model": cfg.model, "method": method, "n": n, "r": r,
                    "rep": rep, "theta_hat": float(est.theta_hat[0]),
                    "converged": int(est.converged),
                })
        for (method, r), outcomes in fits.items():
            good = [t for t, ok in outcomes if ok]
            bad = len(outcomes) - len(good)
            if bad > 0.01 * len(outcomes):
                raise ExperimentFailure(
                    f"{bad}/{len(outcomes)} non-converged fits for "
                    f"method={method} r={r} n={n}"
                )
            rmse = float(np.sqrt(np.mean(np.square(good)))) if good else float("nan")
            aggregates.append({
                "model": cfg.model, "method": method, "n": n, "r": r,
                "rmse": rmse, "reps_used": len(good), "nonconverged": bad,
            })
    return results, aggregates


# ---------------------------------------------------------------------------
# Driver and CSV output
# ---------------------------------------------------------------------------

_RUNNERS = {
    "smooth_convergence": run_smooth_convergence,
    "ars_convergence": run_ars_convergence,
    "link_scaling": run_link_scaling,
    "rmse_fixed_n": run_rmse_fixed_n,
}


def _format_cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _write_csv(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if not rows:
            return
        header = list(rows[0].keys())
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(row[col]) for col in header])


def run_experiment(cfg: ExperimentConfig, out_dir=None, reps: int | None = None,
                   seed: int | None = None) -> dict:
    """Run one experiment and write results.csv, aggregate.csv, meta.json.

    ``out_dir`` falls back to the config's own output path."""
    if reps is not None:
        cfg = replace(cfg, reps=int(reps))
    if seed is not None:
        cfg = replace(cfg, base_seed=int(seed))
    if out_dir is None:
        if not cfg.out_dir:
            raise ValueError("no output directory given")
        out_dir = cfg.out_dir
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    results, aggregates = _RUNNERS[cfg.experiment](cfg)
    elapsed = time.perf_counter() - t0
    _write_csv(out_dir / "results.csv", results)
    _write_csv(out_dir / "aggregate.csv", aggregates)
    from . import __version__

    meta = {
        "config": cfg.to_json(),
        "version": __version__,
        "wall_seconds": elapsed,
    }
    with open(out_dir / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {
        "results": out_dir / "results.csv",
        "aggregate": out_dir / "aggregate.csv",
        "meta": out_dir / "meta.json",
        "n_results": len(results),
        "n_aggregates": len(aggregates),
        "wall_seconds": elapsed,
    }
