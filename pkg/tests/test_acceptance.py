"""Acceptance suite: the primary criteria at desk scale (m = 500).

Every test prints one PASS/FAIL line (visible with ``pytest -s``); the
expensive experiment runs are shared module-scoped fixtures.  Two
sub-checks are marked strict-xfail because the behavior they demand is
quantitatively unreachable; the analysis lives in the decisions ledger.
"""
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from male.diagnostics import (
    check_log_composition_bounds,
    default_probes,
    fd_check,
    fit_rate_values,
)
from male.estimator import MalProblem, maximize
from male.experiments import (
    default_config,
    run_ars_convergence,
    run_link_scaling,
    run_rmse_fixed_n,
    run_smooth_convergence,
)
from male.link import LinkFunction, evaluate as link_evaluate
from male.models import (
    butler_moffitt,
    generate_dataset,
    mixed_logit_1d,
    rc_logit_mv,
    rc_regression,
)
from male.quadrature import apply, gauss_hermite, gauss_legendre, gaussian_rule, product_rule
from male.rng import derive_seed
from male.sparse_grid import SparseGridSpec, smolyak

from _oracles import interval_moment, logit_newton_fit, normal_moment

DESK_REPS = 500


def _report(label: str, ok: bool, detail: str = "") -> bool:
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] {label}" + (f" -- {detail}" if detail else ""))
    return ok


# ---------------------------------------------------------------------------
# shared experiment runs
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def fig1():
    cfg = replace(default_config("smooth_convergence"), reps=DESK_REPS)
    t0 = time.perf_counter()
    results, aggregates = run_smooth_convergence(cfg)
    elapsed = time.perf_counter() - t0
    rmse = {(row["method"], row["r"]): row["rmse"] for row in aggregates}
    return rmse, sorted(cfg.r_values), elapsed


@pytest.fixture(scope="module")
def fig2():
    cfg = replace(default_config("ars_convergence"), reps=DESK_REPS)
    t0 = time.perf_counter()
    results, aggregates = run_ars_convergence(cfg)
    elapsed = time.perf_counter() - t0
    rmse = {(row["method"], row["r"]): row["rmse"] for row in aggregates}
    return rmse, sorted(cfg.r_values), elapsed


@pytest.fixture(scope="module")
def fig3():
    cfg = default_config("link_scaling")
    t0 = time.perf_counter()
    results, aggregates = run_link_scaling(cfg)
    elapsed = time.perf_counter() - t0
    series = {}
    for row in aggregates:
        series.setdefault((row["link"], row["method"]), []).append(
            (row["n"], row["scaled_error"])
        )
    series = {k: [s for _, s in sorted(v)] for k, v in series.items()}
    return series, cfg, elapsed


@pytest.fixture(scope="module")
def fig4():
    cfg = replace(default_config("rmse_fixed_n"), reps=DESK_REPS)
    t0 = time.perf_counter()
    results, aggregates = run_rmse_fixed_n(cfg)
    elapsed = time.perf_counter() - t0
    rmse = {(row["method"], row["n"], row["r"]): row["rmse"] for row in aggregates}
    floor = {row["n"]: row["rmse"] for row in aggregates if row["method"] == "floor"}
    return rmse, floor, elapsed


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------


def test_criterion_gauss_rules():
    t0 = time.perf_counter()
    worst = 0.0
    for r in range(1, 31):
        gh = gauss_hermite(r)
        gl = gauss_legendre(r, -1.0, 1.0)
        abs_gh = np.abs(gh.nodes)
        abs_gl = np.abs(gl.nodes)
        for k in range(2 * r):
            got = apply(gh, lambda v: v**k)
            exact = normal_moment(k)
            scale = max(1.0, abs(exact), float(np.dot(gh.weights, abs_gh**k)))
            worst = max(worst, abs(got - exact) / scale)
            got = apply(gl, lambda v: v**k)
            exact = interval_moment(k, -1.0, 1.0)
            scale = max(1.0, abs(exact), float(np.dot(gl.weights, abs_gl**k)))
            worst = max(worst, abs(got - exact) / scale)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 1.0
    assert _report(
        "Gauss rules exact on degree <= 2r-1 for r <= 30", ok,
        f"worst rel err {worst:.2e}, {elapsed:.2f}s",
    )


def test_criterion_derivative_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(314)
    worst_g = worst_h = 0.0
    for model in (mixed_logit_1d(), rc_regression(), butler_moffitt(3), rc_logit_mv(2)):
        lo = np.maximum(model.theta_box[:, 0], -2.0)
        hi = np.minimum(model.theta_box[:, 1], 2.0)
        pts = []
        for _ in range(100):
            v = rng.normal() if model.dim_v == 1 else rng.normal(size=model.dim_v)
            z = rng.normal(size=model.dim_z)
            theta = lo + (hi - lo) * rng.random(model.dim_theta)
            pts.append((v, z, theta))
        rep = fd_check(model, pts)
        worst_g = max(worst_g, rep.max_grad_rel)
        worst_h = max(worst_h, rep.max_hess_rel)
    elapsed = time.perf_counter() - t0
    ok = worst_g <= 1e-6 and worst_h <= 1e-5 and elapsed < 10.0
    assert _report(
        "derivative suite (100 random points per model)", ok,
        f"grad {worst_g:.2e}, hess {worst_h:.2e}, {elapsed:.1f}s",
    )


def test_criterion_figure1(fig1):
    rmse, rs, elapsed = fig1
    mc_fit = fit_rate_values(rs, [rmse[("mc", r)] for r in rs])
    halton_fit = fit_rate_values(rs, [rmse[("halton", r)] for r in rs])
    mc_slope = -mc_fit.params["s"]
    halton_slope = -halton_fit.params["s"]
    checks = {
        "mc slope": abs(mc_slope + 0.5) <= 0.15,
        "halton slope": halton_slope <= -0.7,
        "gh16<=mc16384": rmse[("gh", 16)] <= rmse[("mc", 16384)],
        "gh16<=halton128": rmse[("gh", 16)] <= rmse[("halton", 128)],
        "runtime": elapsed < 300.0,
    }
    assert _report(
        "figure-1 replica (smooth model, m=500)", all(checks.values()),
        f"mc slope {mc_slope:.3f}, halton slope {halton_slope:.3f}, "
        f"gh16 {rmse[('gh', 16)]:.2e} vs mc16384 {rmse[('mc', 16384)]:.2e} "
        f"and halton128 {rmse[('halton', 128)]:.2e}, {elapsed:.0f}s; "
        + str({k: v for k, v in checks.items() if not v}),
    )


def test_criterion_figure2(fig2):
    rmse, rs, elapsed = fig2
    slopes = {}
    for method in ("mc", "halton", "gl"):
        fit = fit_rate_values(rs, [rmse[(method, r)] for r in rs])
        slopes[method] = -fit.params["s"]
    max_ratio = max(rmse[("halton", r)] / rmse[("gh", r)] for r in rs)
    checks = {
        "mc slope": abs(slopes["mc"] + 0.5) <= 0.15,
        "halton slope": -1.5 <= slopes["halton"] <= -0.7,
        "gl slope": -1.5 <= slopes["gl"] <= -0.7,
        "gh not 2 orders better": max_ratio < 100.0,
        "runtime": elapsed < 300.0,
    }
    assert _report(
        "figure-2 replica (indicator model, m=500)", all(checks.values()),
        f"slopes {slopes['mc']:.3f}/{slopes['halton']:.3f}/{slopes['gl']:.3f}, "
        f"max halton/gh {max_ratio:.2f}, {elapsed:.0f}s; "
        + str({k: v for k, v in checks.items() if not v}),
    )


def test_criterion_figure3_constant_link(fig3):
    series, cfg, elapsed = fig3
    ok = all(
        min(series[("constant", method)]) >= 0.5 * series[("constant", method)][0]
        for method in cfg.methods
    )
    ok = ok and elapsed < 600.0
    assert _report(
        "figure-3 constant link: no method's series falls below half its start",
        ok, f"{elapsed:.0f}s",
    )


def test_criterion_figure3_logarithmic_link(fig3):
    series, cfg, _ = fig3
    s = series[("logarithmic", "gh")]
    violations = sum(1 for a, b in zip(s, s[1:]) if b > a)
    ok = violations <= 1 and s[-1] < 0.1 * s[0]
    assert _report(
        "figure-3 logarithmic link: gauss-hermite series decreases to <10%",
        ok, f"final/initial {s[-1] / s[0]:.3f}, violations {violations}",
    )


def test_criterion_figure3_linear_link_quadrature_methods(fig3):
    series, cfg, _ = fig3
    details = {}
    ok = True
    for method in ("gh", "halton"):
        s = series[("linear", method)]
        details[method] = s[-1] / s[0]
        ok = ok and s[-1] < 0.1 * s[0]
    assert _report(
        "figure-3 linear link: quadrature/QMC series decrease to <10%",
        ok, str({k: f"{v:.2e}" for k, v in details.items()}),
    )


@pytest.mark.xfail(
    strict=True,
    reason="Monte Carlo integration error is Theta(r^(-1/2)) in every "
    "aggregation, so sqrt(n) * E(a*n) is constant in n; no linear link can "
    "make this series vanish (decisions ledger has the derivation)",
)
def test_criterion_figure3_linear_link_monte_carlo(fig3):
    series, cfg, _ = fig3
    s = series[("linear", "mc")]
    _report(
        "figure-3 linear link: monte-carlo series decreases to <10%",
        s[-1] < 0.1 * s[0],
        f"final/initial {s[-1] / s[0]:.3f} (expected failure, spec defect)",
    )
    assert s[-1] < 0.1 * s[0]


def test_criterion_figure4(fig4):
    rmse, floor, elapsed = fig4
    gh_gaps = {
        (n, r): abs(rmse[("gh", n, r)] / floor[n] - 1.0)
        for n in (50, 5000) for r in (32, 64, 128)
    }
    mc_excess = {n: rmse[("mc", n, 8)] / floor[n] - 1.0 for n in (50, 5000)}
    checks = {
        "floor ordering": floor[5000] < floor[50],
        "gh near floor": all(g <= 0.05 for g in gh_gaps.values()),
        "mc excess grows with n": mc_excess[5000] > mc_excess[50],
        "runtime": elapsed < 1200.0,
    }
    assert _report(
        "figure-4 replica (estimator RMSE at fixed n, m=500)",
        all(checks.values()),
        f"floors {floor[50]:.4f}/{floor[5000]:.4f}, worst gh gap "
        f"{max(gh_gaps.values()):.4f}, mc excess {mc_excess[50]:.2f} -> "
        f"{mc_excess[5000]:.2f}, {elapsed:.0f}s; "
        + str({k: v for k, v in checks.items() if not v}),
    )


def test_criterion_theorem8_synthetic():
    ns = [10**k for k in range(2, 8)]
    alg = LinkFunction("algebraic", c=1, s=2, gamma=0.6)
    expo = LinkFunction("exponential", c=1, alpha=1, beta=1, gamma=0.6)
    ok = True
    for link, err in ((alg, lambda r: r**-2.0), (expo, lambda r: math.exp(-r))):
        for n in ns:
            val = math.sqrt(n) * err(link_evaluate(link, n))
            ok = ok and val <= n**-0.1 * 1.01
    assert _report(
        "theorem-8 synthetic check: sqrt(n) E(R(n)) <= 1.01 n^-0.1", ok
    )


def test_criterion_appendix_bounds():
    model = rc_regression()
    probes = default_probes(model)
    fine = gauss_hermite(100)
    coarse = gauss_hermite(4)

    def stack(rule):
        vals, grads, hessians = [], [], []
        for theta in probes.thetas:
            phi = model.eval(rule.nodes, probes.z, theta)
            vals.append(phi @ rule.weights)
            g = model.grad_theta(rule.nodes, probes.z, theta)
            grads.append(np.tensordot(g, rule.weights, axes=([1], [0])))
            h = model.hess_theta(rule.nodes, probes.z, theta)
            hessians.append(np.tensordot(h, rule.weights, axes=([1], [0])))
        return (np.concatenate(vals), np.vstack(grads),
                np.concatenate(hessians, axis=0))

    gv, gg, gh_ = stack(fine)
    hv, hg, hh_ = stack(coarse)
    delta = min(gv.min(), hv.min())
    violations = 0
    if delta <= 0:
        violations += 1
    else:
        report = check_log_composition_bounds(
            gv, hv, delta, g_grad=gg, h_grad=hg, g_hess=gh_, h_hess=hh_
        )
        violations += len(report.violations)

    # fifty randomized smooth positive pairs with delta = 0.1
    rng = np.random.default_rng(2718)
    for _ in range(50):
        thetas = rng.uniform(-1, 1, size=(40, 2))

        def smooth_pair():
            A = 0.1 * rng.standard_normal((2, 2))
            A = 0.5 * (A + A.T)
            b = 0.3 * rng.standard_normal(2)
            c = rng.uniform(-0.3, 0.3)
            q = np.einsum("pi,ij,pj->p", thetas, A, thetas) + thetas @ b + c
            eq = np.exp(q)
            grad_q = 2.0 * thetas @ A + b
            vals = 0.1 + eq
            grads = eq[:, None] * grad_q
            hessians = eq[:, None, None] * (
                grad_q[:, :, None] * grad_q[:, None, :] + 2.0 * A[None, :, :]
            )
            return vals, grads, hessians

        gv, gg, gh_ = smooth_pair()
        hv, hg, hh_ = smooth_pair()
        report = check_log_composition_bounds(
            gv, hv, 0.1, g_grad=gg, h_grad=hg, g_hess=gh_, h_hess=hh_
        )
        violations += len(report.violations)
    assert _report(
        "log-composition bounds hold with zero violations",
        violations == 0, f"violations {violations}",
    )


def test_criterion_sparse_grid():
    model = rc_logit_mv(2)
    theta = np.array([0.3, -0.2, 1.0, 0.8, 0.4])
    z = np.array([1.0, -0.5])
    sparse = smolyak(SparseGridSpec(d=2, level=5))
    tensor = product_rule(gauss_hermite(15), 2)
    diff = abs(
        apply(sparse, lambda p: model.eval(p, z, theta))
        - apply(tensor, lambda p: model.eval(p, z, theta))
    )
    mass = abs(sparse.weights.sum() - 1.0)
    has_negative = all(
        (smolyak(SparseGridSpec(d=2, level=l)).weights < 0).any() for l in (3, 4, 5)
    )
    ok = diff <= 1e-4 and mass <= 1e-10 and has_negative
    assert _report(
        "sparse grid: tensor agreement, unit mass, negative weights",
        ok, f"diff {diff:.2e}, |mass-1| {mass:.2e}, negatives {has_negative}",
    )


def test_criterion_estimator_oracle_equivalence():
    model = mixed_logit_1d().with_theta_box([[-10.0, 10.0], [0.0, 0.0]])
    worst = 0.0
    for seed in range(20):
        data = generate_dataset(
            "mixed_logit_1d", 200, derive_seed(9000, seed), (0.5, 0.8)
        )
        problem = MalProblem(model, data, gaussian_rule("gh", 16))
        est = maximize(problem, [0.0, 0.0], tol=1e-11)
        oracle = logit_newton_fit(data.records[:, 0])
        assert est.converged
        worst = max(worst, abs(est.theta_hat[0] - oracle))
    ok = worst <= 1e-8
    assert _report(
        "pinned-sigma logit matches the scalar Newton oracle on 20 datasets",
        ok, f"worst gap {worst:.2e}",
    )
