"""Error measurement against reference oracles.

The worst-case error of an r-point rule is a supremum over all admissible
(z, theta); that is not computable, so every report here replaces it by the
maximum over a documented finite probe grid (default: 200 synthetic records
crossed with a 9-point parameter grid inside the box).  References are the
model's closed form when it has one, otherwise a 100-point Gauss-Hermite
rule (tensorized in several dimensions).  Stochastic methods are
seed-averaged over repetitions with per-repetition reseeding.

Also here: convergence-rate fitting (algebraic vs exponential decay),
scaled-error series sqrt(n) * E(R(n)) for a link function, the numerical
check of the log-composition inequalities (value, gradient, and Hessian
bounds with constants C1 = (1 + sup|grad h|)/delta^2 and
C2 = 4 (1 + sup|grad h|^2 + sup|hess h|)/delta^3), and finite-difference
validation of analytic model derivatives.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .link import LinkFunction, evaluate as link_evaluate
from .models import LikelihoodIntegrand, default_true_theta, generate_dataset
from .quadrature import (
    METHOD_ALIASES,
    RuleND,
    gauss_hermite,
    gaussian_rule,
    is_stochastic,
    product_rule,
    rule_nodes,
)
from .rng import DEFAULT_SEED, derive_seed

__all__ = [
    "ProbeSet",
    "ErrorReport",
    "RateFit",
    "BoundsReport",
    "FdReport",
    "default_probes",
    "reference_rule",
    "error_curve",
    "fit_rate",
    "fit_rate_values",
    "scaled_error_series",
    "check_log_composition_bounds",
    "fd_check",
]


@dataclass(frozen=True)
class ProbeSet:
    """Finite (z, theta) grid standing in for the sup over the full domain."""

    z: np.ndarray        # (P, q)
    thetas: np.ndarray   # (T, p); a single empty row for parameter-free models
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "z", np.atleast_2d(np.asarray(self.z, float)))
        th = np.asarray(self.thetas, dtype=float)
        if th.ndim == 1:
            th = th[:, None]
        object.__setattr__(self, "thetas", th)


def default_probes(integrand: LikelihoodIntegrand, n_z: int = 200,
                   n_theta: int = 9, seed: int = DEFAULT_SEED) -> ProbeSet:
    """Records drawn from the model's own process crossed with a parameter
    grid spanning the box."""
    ds = generate_dataset(
        integrand.name, n_z, derive_seed(seed, "probes", integrand.name),
        default_true_theta(integrand.name),
    )
    p = integrand.dim_theta
    if p == 0:
        thetas = np.zeros((1, 0))
    elif p == 1:
        lo, hi = integrand.theta_box[0]
        thetas = np.linspace(lo, hi, n_theta)[:, None]
    else:
        # fixed low-discrepancy fill of the box
        from .quadrature import radical_inverse

        cols = []
        primes = (2, 3, 5, 7, 11, 13, 17, 19)
        idx = np.arange(1, n_theta + 1)
        for j in range(p):
            u = radical_inverse(idx, primes[j % len(primes)])
            lo, hi = integrand.theta_box[j]
            cols.append(lo + (hi - lo) * u)
        thetas = np.column_stack(cols)
    return ProbeSet(
        ds.records, thetas,
        f"{n_z} records from the {integrand.name} process x {len(thetas)} theta points",
    )


@dataclass
class ErrorReport:
    """Sup- and RMS-error proxies per rule size against one reference.

    ``per_rep_sup`` keeps the sup error of every repetition so that both
    max-over-reps and averaged aggregations stay computable downstream.
    """

    method: str
    r_values: list
    sup_error: list
    rmse: list
    probe_spec: str
    reference: str
    k: int = 0
    per_rep_sup: list = field(default_factory=list)

    def __post_init__(self):
        r = list(self.r_values)
        if any(b <= a for a, b in zip(r, r[1:])):
            raise ValueError("r_values must be strictly increasing")
        if any(e < 0 for e in list(self.sup_error) + list(self.rmse)):
            raise ValueError("errors must be nonnegative")


def reference_rule(integrand: LikelihoodIntegrand, size: int = 100) -> RuleND:
    """Fine Gauss-Hermite reference: size points in 1-D, a tensor grid of
    40-point rules for d in {2, 3}."""
    d = integrand.dim_v
    if d == 1:
        return gaussian_rule("gh", size)
    if d <= 3:
        return product_rule(gauss_hermite(40), d)
    raise ValueError("reference rules are provided for d <= 3 only")


def _derivative_stack(integrand, rule, probes: ProbeSet, k: int):
    """All partial-derivative values up to order k on the probe grid.

    Returns an array (T, P, m) where m = 1 + p + p^2 truncated to the order,
    holding f and the requested theta-derivatives, each rule-weighted.
    """
    nodes = rule_nodes(rule)
    w = rule.weights
    p = integrand.dim_theta
    cols = 1 + (p if k >= 1 else 0) + (p * p if k >= 2 else 0)
    out = np.empty((len(probes.thetas), probes.z.shape[0], cols))
    for t, theta in enumerate(probes.thetas):
        phi = integrand.eval(nodes, probes.z, theta if p else None)
        out[t, :, 0] = phi @ w
        if k >= 1:
            g = integrand.grad_theta(nodes, probes.z, theta)
            out[t, :, 1:1 + p] = np.tensordot(g, w, axes=([1], [0]))
        if k >= 2:
            h = integrand.hess_theta(nodes, probes.z, theta)
            out[t, :, 1 + p:] = np.tensordot(h, w, axes=([1], [0])).reshape(-1, p * p)
    return out


def _reference_stack(integrand, reference, probes: ProbeSet, k: int):
    if reference is None:
        if integrand.exact_f is not None and (k == 0 or integrand.dim_theta == 0):
            vals = integrand.exact_f(probes.z[:, 0] if integrand.dim_z == 1 else probes.z)
            return np.asarray(vals, float).reshape(1, -1, 1), "exact_f"
        reference = reference_rule(integrand)
    return (
        _derivative_stack(integrand, reference, probes, k),
        f"gauss_hermite reference with {reference.r} points",
    )


def error_curve(integrand: LikelihoodIntegrand, method: str, r_values,
                probes: ProbeSet | None = None, reference=None, k: int = 0,
                reps: int = 500, base_seed: int = DEFAULT_SEED,
                d: int | None = None) -> ErrorReport:
    """Sup and RMS probe errors of one method across rule sizes.

    ``k`` <= 2 adds theta-derivatives up to that order to the error (the
    maximum over all partials).  Deterministic methods run once per r;
    stochastic ones are averaged over ``reps`` reseeded repetitions.
    """
    if k > 0 and not integrand.has_derivatives:
        raise ValueError("k >= 1 requires an integrand with derivatives")
    if k > 2:
        raise ValueError("derivative order k must be at most 2")
    fam = METHOD_ALIASES.get(method)
    if fam is None:
        raise ValueError(f"unknown method {method!r}")
    d = integrand.dim_v if d is None else d
    probes = probes if probes is not None else default_probes(integrand)
    r_values = [int(r) for r in r_values]
    if isinstance(reference, RuleND) and reference.construction == "product" and fam == "gh":
        # comparing a rule against a coarser member of its own family only
        # measures the reference's error
        if reference.r < max(r_values):
            raise ValueError("reference rule is coarser than the tested sizes")
    ref_stack, ref_label = _reference_stack(integrand, reference, probes, k)
    n_reps = reps if is_stochastic(method) else 1
    sup_errors, rms_errors, per_rep = [], [], []
    for r in r_values:
        sups = np.empty(n_reps)
        rmss = np.empty(n_reps)
        for rep in range(n_reps):
            seed = derive_seed(base_seed, method, r, rep)
            rule = gaussian_rule(method, r, d=d, seed=seed)
            stack = _derivative_stack(integrand, rule, probes, k)
            err = np.abs(stack - ref_stack).max(axis=-1)  # max over partials
            sups[rep] = err.max()
            rmss[rep] = math.sqrt(float(np.mean(err**2)))
        sup_errors.append(float(sups.mean()))
        rms_errors.append(float(np.sqrt(np.mean(rmss**2))))
        per_rep.append([float(s) for s in sups])
    return ErrorReport(
        method=method,
        r_values=r_values,
        sup_error=sup_errors,
        rmse=rms_errors,
        probe_spec=probes.description,
        reference=ref_label,
        k=k,
        per_rep_sup=per_rep,
    )


@dataclass
class RateFit:
    """Best-fitting decay model of an error sequence."""

    model: str            # "algebraic" or "exponential"
    params: dict
    r2: float
    degenerate: bool = False


def _lin_fit(x, y):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return coef[0], coef[1], r2


def fit_rate_values(r_values, errors) -> RateFit:
    """Fit log E against log r (algebraic) and against r^beta for beta in
    {0.5, 1} (exponential); keep the better fit by R^2."""
    r = np.asarray(r_values, float)
    e = np.asarray(errors, float)
    keep = e > 0
    if np.all(e < 1e-14):
        return RateFit("algebraic", {"c": 0.0, "s": 0.0}, 0.0, degenerate=True)
    r, e = r[keep], e[keep]
    if r.size < 4:
        raise ValueError("rate fitting needs at least 4 positive errors")
    loge = np.log(e)
    slope, intercept, r2_alg = _lin_fit(np.log(r), loge)
    best = RateFit("algebraic", {"c": float(np.exp(intercept)), "s": float(-slope)}, r2_alg)
    for beta in (0.5, 1.0):
        slope, intercept, r2 = _lin_fit(r**beta, loge)
        if r2 > best.r2 and slope < 0:
            best = RateFit(
                "exponential",
                {"c": float(np.exp(intercept)), "alpha": float(-slope), "beta": beta},
                r2,
            )
    return best


def fit_rate(report: ErrorReport, errors: str = "sup") -> RateFit:
    series = report.sup_error if errors == "sup" else report.rmse
    return fit_rate_values(report.r_values, series)


def scaled_error_series(integrand: LikelihoodIntegrand, method: str,
                        link: LinkFunction, n_values, probes=None,
                        reference=None, k: int = 1, reps: int = 5,
                        base_seed: int = DEFAULT_SEED):
    """sqrt(n) * E(R(n)) along the given sample sizes.

    E is the sup-error proxy of ``error_curve`` at derivative order k
    (k = 1 matches the error functional entering the normality requirement;
    parameter-free integrands force k = 0).
    """
    if not integrand.has_derivatives:
        k = 0
    n_values = [int(n) for n in n_values]
    if any(b <= a for a, b in zip(n_values, n_values[1:])):
        raise ValueError("n_values must be increasing")
    probes = probes if probes is not None else default_probes(integrand)
    rows = []
    cache: dict[int, float] = {}
    for n in n_values:
        r = link_evaluate(link, n)
        if r not in cache:
            rep = error_curve(
                integrand, method, [r], probes=probes, reference=reference,
                k=k, reps=reps, base_seed=base_seed,
            )
            cache[r] = rep.sup_error[0]
        rows.append((n, r, math.sqrt(n) * cache[r]))
    return rows


@dataclass
class BoundsReport:
    """Outcome of the log-composition inequality checks."""

    entries: list = field(default_factory=list)  # (name, lhs, rhs, holds)

    @property
    def all_hold(self) -> bool:
        return all(ok for _, _, _, ok in self.entries)

    @property
    def max_slack(self) -> float:
        return max(rhs - lhs for _, lhs, rhs, _ in self.entries)

    @property
    def violations(self) -> list:
        return [e for e in self.entries if not e[3]]


def _specnorm(mats):
    return np.linalg.norm(mats, ord=2, axis=(-2, -1))


def check_log_composition_bounds(g_vals, h_vals, delta, g_grad=None,
                                 h_grad=None, g_hess=None, h_hess=None) -> BoundsReport:
    """Verify on a probe grid that distances between log g and log h are
    controlled by the distances between g and h.

    With both functions >= delta the checks are, writing D = sup|g - h|,
    Dg = sup|grad g - grad h|, Dh = sup|hess g - hess h|:

      value     sup|log g - log h|            <= D / delta
      gradient  sup|grad log g - grad log h|  <= C1(h) (D + Dg)
      hessian   sup|hess log g - hess log h|  <= C2(h) (D + Dg + Dg^2 + Dh)

    with C1(h) = (1 + sup|grad h|) / delta^2 and
    C2(h) = 4 (1 + sup|grad h|^2 + sup|hess h|) / delta^3.  Gradient and
    Hessian entries are checked only when the derivatives are supplied.
    """
    g = np.asarray(g_vals, float).reshape(-1)
    h = np.asarray(h_vals, float).reshape(-1)
    if g.shape != h.shape:
        raise ValueError("g and h must be evaluated on the same probes")
    if delta <= 0 or np.min(g) < delta or np.min(h) < delta:
        raise ValueError("both functions must stay at or above delta on the probes")
    tol = 1e-12
    report = BoundsReport()
    d0 = float(np.max(np.abs(g - h)))
    lhs = float(np.max(np.abs(np.log(g) - np.log(h))))
    rhs = d0 / delta
    report.entries.append(("value", lhs, rhs, lhs <= rhs * (1 + tol) + tol))
    if g_grad is None or h_grad is None:
        return report
    gg = np.asarray(g_grad, float).reshape(g.size, -1)
    hg = np.asarray(h_grad, float).reshape(h.size, -1)
    d1 = float(np.max(np.linalg.norm(gg - hg, axis=1)))
    sup_hg = float(np.max(np.linalg.norm(hg, axis=1)))
    # a floor near the double range makes the constants overflow; the bounds
    # then hold vacuously
    with np.errstate(divide="ignore", over="ignore"):
        c1 = (1.0 + sup_hg) / delta**2
    lhs = float(np.max(np.linalg.norm(gg / g[:, None] - hg / h[:, None], axis=1)))
    rhs = c1 * (d0 + d1)
    report.entries.append(("gradient", lhs, rhs, lhs <= rhs * (1 + tol) + tol))
    if g_hess is None or h_hess is None:
        return report
    p = gg.shape[1]
    gh_ = np.asarray(g_hess, float).reshape(g.size, p, p)
    hh_ = np.asarray(h_hess, float).reshape(h.size, p, p)
    d2 = float(np.max(_specnorm(gh_ - hh_)))
    sup_hh = float(np.max(_specnorm(hh_)))
    with np.errstate(divide="ignore", over="ignore"):
        c2 = 4.0 * (1.0 + sup_hg**2 + sup_hh) / delta**3
    def log_hess(vals, grads, hesses):
        ratio = grads / vals[:, None]
        return hesses / vals[:, None, None] - ratio[:, :, None] * ratio[:, None, :]
    lhs = float(np.max(_specnorm(log_hess(g, gg, gh_) - log_hess(h, hg, hh_))))
    rhs = c2 * (d0 + d1 + d1**2 + d2)
    report.entries.append(("hessian", lhs, rhs, lhs <= rhs * (1 + tol) + tol))
    return report


@dataclass
class FdReport:
    """Worst relative deviation of analytic derivatives from central
    finite differences."""

    max_grad_rel: float
    max_hess_rel: float
    points: int


def fd_check(integrand: LikelihoodIntegrand, points, grad_step: float = 1e-5,
             hess_step: float = 1e-4) -> FdReport:
    """Compare analytic gradient/Hessian with central differences at the
    given (v, z, theta) triples.

    Deviations are scaled by max(1, magnitude), so the thresholds read as
    relative errors on O(1) derivatives without blowing up where a
    derivative vanishes.
    """
    if not integrand.has_derivatives:
        raise NotImplementedError("the integrand provides no derivatives")
    p = integrand.dim_theta
    worst_g = 0.0
    worst_h = 0.0
    for v, z, theta in points:
        theta = np.asarray(theta, float).reshape(-1)
        ga = np.asarray(integrand.grad_theta(v, z, theta), float)
        gf = np.empty(p)
        for j in range(p):
            e = np.zeros(p)
            e[j] = grad_step
            gf[j] = (integrand.eval(v, z, theta + e) - integrand.eval(v, z, theta - e)) / (
                2 * grad_step
            )
        scale = max(1.0, float(np.max(np.abs(ga))), float(np.max(np.abs(gf))))
        worst_g = max(worst_g, float(np.max(np.abs(ga - gf))) / scale)
        ha = np.asarray(integrand.hess_theta(v, z, theta), float)
        hf = np.empty((p, p))
        for j in range(p):
            e = np.zeros(p)
            e[j] = hess_step
            hf[:, j] = (
                np.asarray(integrand.grad_theta(v, z, theta + e), float)
                - np.asarray(integrand.grad_theta(v, z, theta - e), float)
            ) / (2 * hess_step)
        scale = max(1.0, float(np.max(np.abs(ha))), float(np.max(np.abs(hf))))
        worst_h = max(worst_h, float(np.max(np.abs(ha - hf))) / scale)
    return FdReport(worst_g, worst_h, len(list(points)))
