"""Approximated log-likelihood assembly and maximization.

The objective is the sample mean of log f-tilde, where each contribution
f-tilde(z_i, theta) applies one shared quadrature rule to the model
integrand (identical sampling: the same rule serves every record).  Score
and Hessian use the same rule on the integrand's analytic derivatives:

    score   = (1/n) sum_i  grad f_i / f_i
    hessian = (1/n) sum_i [ hess f_i / f_i - (grad f_i / f_i)(...)^T ]

Contributions below ``floor_delta`` (possible with negative sparse-grid
weights or extreme tails) are clamped to the floor before the logarithm and
counted, never silently: the log of a non-positive value is the one failure
mode the whole construction cannot absorb.

``maximize`` runs safeguarded Newton ascent: the Hessian is shifted to
negative definiteness, steps are backtracked until the objective increases,
and iterates are projected onto the model's parameter box.  Convergence is
declared on the sup norm of the projected score.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericFailure
from .models import Dataset, LikelihoodIntegrand
from .quadrature import Rule1D, RuleND, rule_dim, rule_nodes

__all__ = [
    "MalProblem",
    "MalEstimate",
    "approx_likelihood_contribution",
    "approx_loglik",
    "approx_score",
    "approx_hessian",
    "maximize",
]

_CHUNK_BUDGET = 4_000_000  # max records x nodes handled per evaluation slab


@dataclass(frozen=True)
class MalProblem:
    """Integrand + data + rule, with the positivity floor for the logarithm."""

    integrand: LikelihoodIntegrand
    data: Dataset
    rule: RuleND | Rule1D
    floor_delta: float = 1e-12

    def __post_init__(self):
        if rule_dim(self.rule) != self.integrand.dim_v:
            raise ValueError("rule dimension does not match the integrand")
        if self.data.dim_z != self.integrand.dim_z:
            raise ValueError("dataset records do not match the integrand")
        if not self.floor_delta > 0:
            raise ValueError("floor_delta must be positive")


@dataclass
class MalEstimate:
    """Result of one maximization run."""

    theta_hat: np.ndarray
    loglik: float
    score_norm: float
    observed_information: np.ndarray
    std_errors: np.ndarray
    iterations: int
    converged: bool
    floor_activations: int
    trace: tuple = ()
    rule_spec: str = ""


def _check_theta(problem: MalProblem, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.size != problem.integrand.dim_theta:
        raise ValueError("theta has the wrong length")
    return theta


def _contributions(problem: MalProblem, theta, order: int):
    """Clamped contributions and rule-weighted derivative sums per record.

    Returns (f, G, H, floored_mask) with f already clamped at the floor;
    G and H are None below the requested order.  Node chunks keep the
    (n, r, p, p) intermediates bounded.
    """
    nodes = rule_nodes(problem.rule)
    w = problem.rule.weights
    Z = problem.data.records
    n = Z.shape[0]
    p = problem.integrand.dim_theta
    r = w.size
    f = np.zeros(n)
    G = np.zeros((n, p)) if order >= 1 else None
    H = np.zeros((n, p, p)) if order >= 2 else None
    step = max(1, min(r, _CHUNK_BUDGET // max(n, 1)))
    for lo in range(0, r, step):
        sel = slice(lo, lo + step)
        chunk = nodes[sel]
        wc = w[sel]
        phi = problem.integrand.eval(chunk, Z, theta)
        phi = phi.reshape(n, -1)
        if not np.all(np.isfinite(phi)):
            raise NumericFailure("integrand produced a non-finite value")
        f += phi @ wc
        if order >= 1:
            g = problem.integrand.grad_theta(chunk, Z, theta).reshape(n, -1, p)
            G += np.tensordot(g, wc, axes=([1], [0]))
        if order >= 2:
            h = problem.integrand.hess_theta(chunk, Z, theta).reshape(n, -1, p, p)
            H += np.tensordot(h, wc, axes=([1], [0]))
    mask = f < problem.floor_delta
    f = np.maximum(f, problem.floor_delta)
    return f, G, H, mask


def approx_likelihood_contribution(problem: MalProblem, z, theta) -> float:
    """f-tilde for one record, clamped at the floor."""
    theta = _check_theta(problem, theta)
    single = Dataset(np.asarray(z, dtype=float).reshape(1, -1))
    prob = MalProblem(problem.integrand, single, problem.rule, problem.floor_delta)
    f, _, _, _ = _contributions(prob, theta, order=0)
    return float(f[0])


def approx_loglik(problem: MalProblem, theta) -> float:
    """Mean log contribution, accumulated in record order."""
    theta = _check_theta(problem, theta)
    f, _, _, _ = _contributions(problem, theta, order=0)
    return float(np.mean(np.log(f)))


def approx_score(problem: MalProblem, theta) -> np.ndarray:
    theta = _check_theta(problem, theta)
    f, G, _, _ = _contributions(problem, theta, order=1)
    return np.mean(G / f[:, None], axis=0)


def approx_hessian(problem: MalProblem, theta) -> np.ndarray:
    theta = _check_theta(problem, theta)
    f, G, H, _ = _contributions(problem, theta, order=2)
    ratio = G / f[:, None]
    hess = H / f[:, None, None] - ratio[:, :, None] * ratio[:, None, :]
    return np.mean(hess, axis=0)


def _loglik_score_hess(problem, theta):
    """Objective with the gradient/Hessian of the *clamped* objective:
    floored records contribute the constant log(floor_delta), so their
    derivative contribution is zero.  (The public approx_score keeps the
    raw-numerator form; this one keeps the line search consistent.)"""
    f, G, H, mask = _contributions(problem, theta, order=2)
    loglik = float(np.mean(np.log(f)))
    if mask.any():
        G = G.copy()
        H = H.copy()
        G[mask] = 0.0
        H[mask] = 0.0
    ratio = G / f[:, None]
    score = np.mean(ratio, axis=0)
    hess = np.mean(
        H / f[:, None, None] - ratio[:, :, None] * ratio[:, None, :], axis=0
    )
    return loglik, score, hess, int(mask.sum())


def _projected_score(theta, score, lo, hi):
    """Zero out score components that push against an active bound."""
    proj = score.copy()
    proj[(theta <= lo) & (score < 0)] = 0.0
    proj[(theta >= hi) & (score > 0)] = 0.0
    return proj


def _ascent_direction(score, hess, free, eig_floor=1e-8):
    """Newton direction on the free coordinates with the Hessian shifted to
    negative definiteness (smallest uniform shift with eigenvalue cap
    -eig_floor)."""
    d = np.zeros_like(score)
    if not free.any():
        return d
    Hf = hess[np.ix_(free, free)]
    lam_max = float(np.linalg.eigvalsh(Hf).max())
    shift = min(0.0, -eig_floor - lam_max)
    Hmod = Hf + shift * np.eye(Hf.shape[0])
    d[free] = np.linalg.solve(Hmod, -score[free])
    return d


def maximize(problem: MalProblem, theta0, tol: float = 1e-8,
             max_iter: int = 200, armijo: float = 1e-4) -> MalEstimate:
    """Safeguarded Newton ascent of the approximated log-likelihood.

    Deterministic given its inputs; non-convergence is reported through the
    ``converged`` flag rather than an exception.  ``floor_activations``
    counts every clamped contribution met during the run.
    """
    if not problem.integrand.has_derivatives:
        raise NotImplementedError("the integrand provides no derivatives")
    box = problem.integrand.theta_box
    lo, hi = box[:, 0], box[:, 1]
    theta = _check_theta(problem, theta0)
    if np.any(theta < lo) or np.any(theta > hi):
        raise ValueError("theta0 lies outside the parameter box")

    floor_count = 0
    trace = []
    converged = False
    loglik, score, hess, fl = _loglik_score_hess(problem, theta)
    floor_count += fl
    iterations = 0
    for iterations in range(1, max_iter + 1):
        proj = _projected_score(theta, score, lo, hi)
        score_norm = float(np.max(np.abs(proj))) if proj.size else 0.0
        trace.append((iterations, loglik, score_norm))
        if score_norm <= tol:
            converged = True
            break
        pinned = lo >= hi
        outward = ((theta <= lo) & (score < 0)) | ((theta >= hi) & (score > 0))
        free = ~(pinned | outward)
        direction = _ascent_direction(score, hess, free)
        if not np.any(direction):
            direction = proj
        step = 1.0
        improved = False
        for _ in range(60):
            candidate = np.clip(theta + step * direction, lo, hi)
            move = candidate - theta
            if not np.any(move):
                break
            f_cand, _, _, fl = _contributions(problem, candidate, order=0)
            floor_count += int(fl.sum())
            cand_loglik = float(np.mean(np.log(f_cand)))
            if cand_loglik >= loglik + armijo * float(score @ move):
                theta = candidate
                loglik, score, hess, fl = _loglik_score_hess(problem, theta)
                floor_count += fl
                improved = True
                break
            step *= 0.5
        if not improved:
            # no uphill step left at this scale; report the projected score
            break

    proj = _projected_score(theta, score, lo, hi)
    score_norm = float(np.max(np.abs(proj))) if proj.size else 0.0
    converged = converged or score_norm <= tol
    n = problem.data.n
    observed_information = -n * hess
    std_errors = np.full(theta.size, np.nan)
    if theta.size:
        eigs = np.linalg.eigvalsh(observed_information)
        if np.all(eigs > 0):
            std_errors = np.sqrt(np.diag(np.linalg.inv(observed_information)))
    return MalEstimate(
        theta_hat=theta,
        loglik=loglik,
        score_norm=score_norm,
        observed_information=observed_information,
        std_errors=std_errors,
        iterations=iterations,
        converged=converged,
        floor_activations=floor_count,
        trace=tuple(trace),
        rule_spec=f"{problem.rule.construction}:r={problem.rule.weights.size}"
        if isinstance(problem.rule, RuleND)
        else f"1d:r={problem.rule.r}",
    )
