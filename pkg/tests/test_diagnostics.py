import math

import numpy as np
import pytest

from male.diagnostics import (
    ProbeSet,
    check_log_composition_bounds,
    default_probes,
    error_curve,
    fd_check,
    fit_rate,
    fit_rate_values,
    reference_rule,
    scaled_error_series,
)
from male.link import LinkFunction
from male.models import (
    LikelihoodIntegrand,
    ars_normal_cdf,
    butler_moffitt,
    mixed_logit_1d,
    rc_regression,
)
from male.models import _flex
from male.quadrature import gauss_hermite, rule_nodes

from _oracles import butler_moffitt_t1_exact, phi


class TestErrorCurve:
    def test_ars_single_draw_error_is_half(self):
        # a one-draw rule puts all mass on one indicator value, so the error
        # at z = 0 is |0 or 1 - 1/2| = 1/2 for every repetition
        probes = ProbeSet(np.array([[0.0]]), np.zeros((1, 0)))
        report = error_curve(ars_normal_cdf(), "mc", [1], probes=probes, reps=16)
        assert report.sup_error[0] == pytest.approx(0.5, abs=1e-15)
        assert all(s == pytest.approx(0.5) for s in report.per_rep_sup[0])

    def test_self_comparison_is_zero(self):
        model = rc_regression()
        probes = default_probes(model, n_z=20, n_theta=5)
        ref = reference_rule(model, 64)
        report = error_curve(model, "gh", [32, 64], probes=probes, reference=ref)
        assert report.sup_error[1] <= 1e-15

    def test_same_family_coarser_reference_rejected(self):
        model = rc_regression()
        probes = default_probes(model, n_z=10, n_theta=3)
        with pytest.raises(ValueError):
            error_curve(model, "gh", [128], probes=probes,
                        reference=reference_rule(model, 64))

    def test_cross_family_larger_r_allowed(self):
        # the reference prescription stays at 100 Gauss-Hermite points even
        # when sampling methods use far more draws
        model = rc_regression()
        probes = default_probes(model, n_z=10, n_theta=3)
        report = error_curve(model, "mc", [256], probes=probes,
                             reference=reference_rule(model, 100), reps=2)
        assert report.sup_error[0] > 0

    def test_increasing_r_required(self):
        with pytest.raises(ValueError):
            error_curve(rc_regression(), "gh", [8, 8],
                        probes=default_probes(rc_regression(), n_z=5, n_theta=3))

    def test_derivative_order_needs_derivatives(self):
        with pytest.raises(ValueError):
            error_curve(ars_normal_cdf(), "mc", [4], k=1)


class TestFitRate:
    def test_exact_power_law(self):
        r = [2, 4, 8, 16, 32, 64, 128]
        fit = fit_rate_values(r, [rr**-2.0 for rr in r])
        assert fit.model == "algebraic"
        assert fit.params["s"] == pytest.approx(2.0, abs=0.01)

    def test_exact_exponential(self):
        r = [2, 4, 8, 16, 32]
        fit = fit_rate_values(r, [math.exp(-rr) for rr in r])
        assert fit.model == "exponential"
        assert fit.params["alpha"] == pytest.approx(1.0, abs=0.01)
        assert fit.params["beta"] == 1.0

    def test_degenerate(self):
        fit = fit_rate_values([2, 4, 8, 16], [1e-16] * 4)
        assert fit.degenerate

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            fit_rate_values([2, 4, 8], [0.1, 0.05, 0.02])

    def test_monte_carlo_rate_on_smooth_model(self):
        model = rc_regression()
        probes = default_probes(model, n_z=50, n_theta=5)
        report = error_curve(model, "mc", [8, 16, 32, 64, 128, 256],
                             probes=probes, reps=60)
        fit = fit_rate(report)
        assert fit.model == "algebraic"
        assert 0.35 <= fit.params["s"] <= 0.65


@pytest.fixture(scope="module")
def probes():
    # record probes at the evaluation point of the convergence studies
    ds = default_probes(rc_regression(), n_z=60, n_theta=3)
    return ProbeSet(ds.z, np.zeros((1, 1)), "60 records at theta 0")


class TestScaledErrorSeries:

    def test_constant_link_does_not_vanish(self, probes):
        rows = scaled_error_series(
            rc_regression(), "mc", LinkFunction("constant", a=8),
            [64, 256, 1024, 4096], probes=probes, reps=4,
        )
        series = [s for _, _, s in rows]
        assert series[-1] >= 0.5 * series[0]

    def test_linear_link_gh_vanishes(self, probes):
        rows = scaled_error_series(
            rc_regression(), "gh", LinkFunction("linear", a=1),
            [64, 256, 1024], probes=probes,
        )
        series = [s for _, _, s in rows]
        assert series[-1] < 0.1 * series[0]

    def test_linear_link_halton_vanishes(self, probes):
        rows = scaled_error_series(
            rc_regression(), "halton", LinkFunction("linear", a=1),
            [64, 256, 1024, 4096, 16384], probes=probes,
        )
        series = [s for _, _, s in rows]
        assert series[-1] < 0.1 * series[0]

    @pytest.mark.xfail(
        strict=True,
        reason="Monte Carlo error decays exactly like r^(-1/2), so under a "
        "linear link sqrt(n)*E(a*n) is constant in n; the claimed decay "
        "toward zero cannot occur (see the decisions ledger)",
    )
    def test_linear_link_mc_vanishes(self, probes):
        rows = scaled_error_series(
            rc_regression(), "mc", LinkFunction("linear", a=1),
            [64, 256, 1024, 4096], probes=probes, reps=6,
        )
        series = [s for _, _, s in rows]
        assert series[-1] < 0.1 * series[0]

    def test_log_link_gh_decreases(self, probes):
        rows = scaled_error_series(
            rc_regression(), "gh", LinkFunction("logarithmic", a=6),
            [64, 1024, 16384], probes=probes,
        )
        series = [s for _, _, s in rows]
        assert series[-1] < series[0]


class TestLogCompositionBounds:
    def test_identity_case(self):
        vals = np.linspace(0.5, 2.0, 11)
        grads = np.linspace(-1, 1, 11)[:, None]
        hessians = np.linspace(-0.5, 0.5, 11)[:, None, None]
        report = check_log_composition_bounds(
            vals, vals, 0.5, g_grad=grads, h_grad=grads,
            g_hess=hessians, h_hess=hessians,
        )
        assert report.all_hold
        for name, lhs, rhs, _ in report.entries:
            assert lhs == 0.0
            assert rhs >= 0.0

    def test_scalar_hand_example(self):
        # g = theta + 2, h = theta + 2.1 on [0, 1] with delta = 2:
        # sup |log g - log h| = log(2.1/2) ~ 0.0488 <= 0.1/2
        thetas = np.linspace(0.0, 1.0, 101)
        report = check_log_composition_bounds(thetas + 2.0, thetas + 2.1, 2.0)
        name, lhs, rhs, holds = report.entries[0]
        assert holds
        assert lhs == pytest.approx(math.log(2.1 / 2.0), abs=1e-6)
        assert rhs == pytest.approx(0.05, abs=1e-12)

    def test_quadrature_pair_on_smooth_model(self):
        model = rc_regression()
        probes = default_probes(model, n_z=50, n_theta=9)
        fine = gauss_hermite(100)
        coarse = gauss_hermite(4)

        def stack(rule):
            vals, grads, hessians = [], [], []
            for theta in probes.thetas:
                phi_vals = model.eval(rule.nodes, probes.z, theta)
                vals.append(phi_vals @ rule.weights)
                g = model.grad_theta(rule.nodes, probes.z, theta)
                grads.append(np.tensordot(g, rule.weights, axes=([1], [0])))
                h = model.hess_theta(rule.nodes, probes.z, theta)
                hessians.append(np.tensordot(h, rule.weights, axes=([1], [0])))
            return (np.concatenate(vals), np.vstack(grads),
                    np.concatenate(hessians, axis=0))

        gv, gg, gh_ = stack(fine)
        hv, hg, hh_ = stack(coarse)
        delta = min(gv.min(), hv.min())
        assert delta > 0
        report = check_log_composition_bounds(
            gv, hv, delta, g_grad=gg, h_grad=hg, g_hess=gh_, h_hess=hh_
        )
        assert report.all_hold
        assert report.max_slack >= 0

    def test_floor_precondition(self):
        with pytest.raises(ValueError):
            check_log_composition_bounds([0.5, 0.05], [0.5, 0.5], 0.1)


class TestFdCheck:
    def test_models_pass(self):
        rng = np.random.default_rng(2)
        for model in (mixed_logit_1d(), butler_moffitt(2)):
            pts = [
                (rng.normal(), rng.normal(size=model.dim_z),
                 np.array([abs(rng.normal()) + 0.2, rng.normal()]))
                for _ in range(100)
            ]
            report = fd_check(model, pts)
            assert report.max_grad_rel <= 1e-6
            assert report.max_hess_rel <= 1e-6

    def test_linear_integrand_zero_hessian(self):
        def _eval(V, Z, th):
            return np.ones((Z.shape[0], V.size)) + th[0] * 0.25

        def _grad(V, Z, th):
            return np.full((Z.shape[0], V.size, 1), 0.25)

        def _hess(V, Z, th):
            return np.zeros((Z.shape[0], V.size, 1, 1))

        model = LikelihoodIntegrand(
            name="affine", dim_v=1, dim_theta=1, dim_z=1,
            theta_box=[[-5, 5]], eval=_flex(_eval, 1, 1),
            grad_theta=_flex(_grad, 1, 1), hess_theta=_flex(_hess, 1, 1),
        )
        pts = [(0.1, [0.0], [0.3]), (1.0, [2.0], [-1.0])]
        report = fd_check(model, pts)
        assert report.max_hess_rel <= 1e-10

    def test_requires_derivatives(self):
        with pytest.raises(NotImplementedError):
            fd_check(ars_normal_cdf(), [(0.0, [0.0], ())])


class TestOracleConsistency:
    def test_ars_exact_against_independent_cdf(self):
        import mpmath

        mpmath.mp.dps = 30
        model = ars_normal_cdf()
        for z in np.linspace(-3, 3, 20):
            assert model.exact_f(z) == pytest.approx(float(mpmath.ncdf(z)), abs=1e-10)

    def test_reference_integration_matches_closed_forms(self):
        model = butler_moffitt(1)
        ref = reference_rule(model, 100)
        nodes = rule_nodes(ref)
        rng = np.random.default_rng(4)
        for _ in range(20):
            z = rng.normal()
            sigma, beta = abs(rng.normal()) + 0.2, rng.normal()
            got = float(model.eval(nodes, [z], (sigma, beta)) @ ref.weights)
            assert got == pytest.approx(
                butler_moffitt_t1_exact(z, sigma, beta), abs=1e-10
            )


def test_probe_superset_monotonicity():
    model = rc_regression()
    big = default_probes(model, n_z=40, n_theta=5)
    small = ProbeSet(big.z[:10], big.thetas)
    ref = reference_rule(model, 100)
    sup_small = error_curve(model, "gh", [8], probes=small, reference=ref).sup_error[0]
    sup_big = error_curve(model, "gh", [8], probes=big, reference=ref).sup_error[0]
    assert sup_big >= sup_small


class TestRateDichotomy:
    def test_ars_deterministic_rates_stay_low(self):
        # on the non-smooth benchmark no method keeps a fast rate
        model = ars_normal_cdf()
        probes = ProbeSet(
            np.random.default_rng(6).standard_normal((200, 1)), np.zeros((1, 0))
        )
        for method in ("gh", "gl"):
            report = error_curve(model, method, [16, 64, 256, 1024], probes=probes)
            fit = fit_rate(report)
            assert fit.model == "algebraic"
            assert fit.params["s"] <= 1.5

    @pytest.mark.xfail(
        strict=True,
        reason="the measured separation between the Gauss-Hermite error at "
        "r=16 and the Monte Carlo trend is 1.4-1.9 orders of magnitude, "
        "short of the claimed two orders (see the decisions ledger)",
    )
    def test_smooth_separation_two_orders(self):
        from dataclasses import replace

        from male.experiments import default_config, run_smooth_convergence

        cfg = replace(default_config("smooth_convergence"), reps=200,
                      methods=("mc", "gh"))
        _, agg = run_smooth_convergence(cfg)
        rmse = {(row["method"], row["r"]): row["rmse"] for row in agg}
        rs = sorted({r for m, r in rmse if m == "mc"})
        fit = fit_rate_values(rs, [rmse[("mc", r)] for r in rs])
        trend16 = fit.params["c"] * 16.0 ** -fit.params["s"]
        assert rmse[("gh", 16)] <= trend16 / 100.0
