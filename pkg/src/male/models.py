"""Likelihood integrands with analytic parameter derivatives.

Each model supplies the function phi(v, z, theta) under the latent-variable
integral of its likelihood contribution, together with the gradient and
Hessian in theta (integration and differentiation commute, so the same
quadrature rule applied to the derivatives approximates the derivatives of
the contribution).  Evaluation is vectorized: ``v`` may be a scalar, an (r,)
array (1-D models), or an (r, d) array; ``z`` a single record (q,) or a
batch (n, q); outputs broadcast to (n, r, ...) and squeeze away singleton
record/node axes.

Models
------
mixed_logit_1d   logistic choice probability with a scalar N(mu, sigma^2)
                 coefficient, standardized so the parameters sit inside the
                 integrand: phi = logistic(z * (theta1 + theta2 * v)).
rc_logit_mv      multivariate random-coefficients logit; theta holds the mean
                 vector and the lower-triangular Cholesky factor of the
                 coefficient covariance (rows serialized diagonal-first).
butler_moffitt   random-effects panel probit: product of normal CDFs sharing
                 one scalar effect.
rc_regression    random-coefficient regression y = x*beta + eps with
                 beta ~ N(theta, 1); phi is a shifted normal density.
ars_normal_cdf   accept/reject indicator benchmark 1(v <= z) with the
                 error-function CDF as exact reference; carries no
                 parameters, so derivative requests raise.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.special import erf, expit, ndtr

from .rng import make_generator

__all__ = [
    "LikelihoodIntegrand",
    "Dataset",
    "mixed_logit_1d",
    "rc_logit_mv",
    "butler_moffitt",
    "rc_regression",
    "ars_normal_cdf",
    "generate_dataset",
    "save_dataset",
    "load_dataset",
    "get_model",
    "default_true_theta",
    "MODEL_NAMES",
]

_SQRT2PI = np.sqrt(2.0 * np.pi)


def _normpdf(x):
    return np.exp(-0.5 * x * x) / _SQRT2PI


@dataclass(frozen=True)
class LikelihoodIntegrand:
    """A model's integrand phi with analytic derivatives in theta.

    ``theta_box`` is the compact parameter set the estimator searches; rows
    are (lower, upper) per coordinate.  ``exact_f`` is a closed form for the
    integrated contribution when one exists.
    """

    name: str
    dim_v: int
    dim_theta: int
    dim_z: int
    theta_box: np.ndarray
    eval: Callable
    grad_theta: Callable
    hess_theta: Callable
    exact_f: Optional[Callable] = None
    has_derivatives: bool = True

    def __post_init__(self):
        box = np.asarray(self.theta_box, dtype=float).reshape(self.dim_theta, 2)
        box.setflags(write=False)
        object.__setattr__(self, "theta_box", box)

    def with_theta_box(self, theta_box) -> "LikelihoodIntegrand":
        """Same model on a different compact parameter box (used to pin
        coordinates by setting lower == upper)."""
        return replace(self, theta_box=np.asarray(theta_box, dtype=float))


def _flex(core, dim_v, dim_z):
    """Lift a batch core (V, Z, theta) -> (n, r, ...) to flexible shapes."""

    def wrapped(v, z, theta=None):
        V = np.asarray(v, dtype=float)
        if dim_v == 1:
            v_single = V.ndim == 0
            V2 = np.atleast_1d(V)
        else:
            v_single = V.ndim == 1
            V2 = V.reshape(1, -1) if v_single else V
            if V2.shape[-1] != dim_v:
                raise ValueError(f"v must have {dim_v} coordinates")
        Z = np.asarray(z, dtype=float)
        z_single = Z.ndim == 0 or (Z.ndim == 1 and Z.size == dim_z and dim_z > 1)
        if dim_z == 1:
            z_single = Z.ndim == 0 or (Z.ndim == 1 and Z.size == 1)
        Z2 = Z.reshape(-1, dim_z) if (z_single or Z.ndim == 1) else Z
        if Z2.ndim != 2 or Z2.shape[1] != dim_z:
            raise ValueError(f"records must have {dim_z} entries")
        th = None if theta is None else np.asarray(theta, dtype=float).reshape(-1)
        out = core(V2, Z2, th)
        if z_single:
            out = out[0]
            if v_single:
                out = out[0]
        elif v_single:
            out = out[:, 0]
        if np.ndim(out) == 0:
            return float(out)
        return out

    return wrapped


# ---------------------------------------------------------------------------
# Mixed logit, one random coefficient
# ---------------------------------------------------------------------------


def mixed_logit_1d() -> LikelihoodIntegrand:
    """Logit choice probability with coefficient x ~ N(mu, sigma^2).

    After standardizing v = (x - mu)/sigma the contribution is
    integral of logistic(z * (theta1 + theta2 * v)) against the standard
    normal weight, theta = (mu, sigma).  The box keeps sigma away from 0 so
    the derivative bounds stay finite; pin sigma via ``with_theta_box`` to
    recover the plain logit.
    """

    def _parts(V, Z, th):
        a1 = np.broadcast_to(Z[:, 0:1], (Z.shape[0], V.size))
        a2 = Z[:, 0:1] * V[None, :]
        phi = expit(th[0] * a1 + th[1] * a2)
        return phi, a1, a2

    def _eval(V, Z, th):
        return _parts(V, Z, th)[0]

    def _grad(V, Z, th):
        phi, a1, a2 = _parts(V, Z, th)
        w = phi * (1.0 - phi)
        return np.stack([a1 * w, a2 * w], axis=-1)

    def _hess(V, Z, th):
        phi, a1, a2 = _parts(V, Z, th)
        t = phi * (1.0 - phi) * (1.0 - 2.0 * phi)
        a = np.stack([a1, a2], axis=-1)
        return t[..., None, None] * a[..., :, None] * a[..., None, :]

    return LikelihoodIntegrand(
        name="mixed_logit_1d",
        dim_v=1,
        dim_theta=2,
        dim_z=1,
        theta_box=[[-10.0, 10.0], [0.01, 10.0]],
        eval=_flex(_eval, 1, 1),
        grad_theta=_flex(_grad, 1, 1),
        hess_theta=_flex(_hess, 1, 1),
    )


# ---------------------------------------------------------------------------
# Multivariate random-coefficients logit
# ---------------------------------------------------------------------------


def _tri_index(d):
    """(row, col) pairs of the lower triangle, rows serialized diagonal-first."""
    pairs = []
    for i in range(d):
        pairs.append((i, i))
        for j in range(i):
            pairs.append((i, j))
    return pairs


def unpack_cholesky(theta, d):
    """Split theta into (mu, C) with C lower triangular, diagonal-first rows."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    mu = theta[:d]
    C = np.zeros((d, d))
    for (i, j), val in zip(_tri_index(d), theta[d:]):
        C[i, j] = val
    return mu, C


def rc_logit_mv(d: int, theta_box=None) -> LikelihoodIntegrand:
    """Multivariate random-coefficients logit on R^d.

    The coefficient vector is N(mu, C C'), reduced to the standard normal
    weight by the Cholesky substitution, so
    phi = logistic(z . C (v + mu)) with theta = (mu, lower triangle of C).
    The diagonal of C is kept positive through the parameter box.
    """
    if d < 1:
        raise ValueError("d must be a positive integer")
    p = d + d * (d + 1) // 2
    pairs = _tri_index(d)
    if theta_box is None:
        theta_box = [[-10.0, 10.0]] * d + [
            [0.01, 10.0] if i == j else [-10.0, 10.0] for (i, j) in pairs
        ]
    box = np.asarray(theta_box, dtype=float).reshape(p, 2)
    for k, (i, j) in enumerate(pairs):
        if i == j and box[d + k, 0] <= 0.0:
            raise ValueError(
                "theta_box must keep the Cholesky diagonal strictly positive"
            )

    def _core(V, Z, th):
        if V.ndim == 1:  # d == 1 passes plain node vectors
            V = V[:, None]
        mu, C = unpack_cholesky(th, d)
        y = (V + mu) @ C.T          # (r, d)
        s = Z @ y.T                 # (n, r)
        phi = expit(s)
        return phi, mu, C, V, Z

    def _eval(V, Z, th):
        return _core(V, Z, th)[0]

    def _ds_dtheta(V, Z, mu, C):
        n, r = Z.shape[0], V.shape[0]
        A = np.empty((n, r, p))
        ZC = Z @ C                  # (n, d): ds/dmu
        A[:, :, :d] = ZC[:, None, :]
        shifted = V + mu            # (r, d)
        for k, (i, j) in enumerate(pairs):
            A[:, :, d + k] = Z[:, i:i + 1] * shifted[None, :, j]
        return A

    def _grad(V, Z, th):
        phi, mu, C, V, Z = _core(V, Z, th)
        A = _ds_dtheta(V, Z, mu, C)
        return phi[..., None] * (1.0 - phi)[..., None] * A

    def _hess(V, Z, th):
        phi, mu, C, V, Z = _core(V, Z, th)
        A = _ds_dtheta(V, Z, mu, C)
        w1 = phi * (1.0 - phi)
        w2 = w1 * (1.0 - 2.0 * phi)
        H = w2[..., None, None] * A[..., :, None] * A[..., None, :]
        # second derivative of the index: d2s/dmu_j dC_{ij} = z_i
        B = np.zeros((Z.shape[0], p, p))
        for k, (i, j) in enumerate(pairs):
            B[:, j, d + k] += Z[:, i]
            B[:, d + k, j] += Z[:, i]
        H += w1[..., None, None] * B[:, None, :, :]
        return H

    return LikelihoodIntegrand(
        name="rc_logit_mv",
        dim_v=d,
        dim_theta=p,
        dim_z=d,
        theta_box=box,
        eval=_flex(_eval, d, d),
        grad_theta=_flex(_grad, d, d),
        hess_theta=_flex(_hess, d, d),
    )


# ---------------------------------------------------------------------------
# Butler-Moffitt random-effects probit
# ---------------------------------------------------------------------------


def butler_moffitt(T: int) -> LikelihoodIntegrand:
    """Panel probit with one shared normal effect over T periods.

    phi = prod_t Phi(z_t * beta + sigma * v) with theta = (sigma, beta); the
    normal CDF is evaluated through erf, keeping the model's accuracy floor
    below any quadrature error under study.
    """
    if T < 1:
        raise ValueError("T must be a positive integer")

    def _core(V, Z, th):
        sigma, beta = th
        args = Z[:, None, :] * beta + sigma * V[None, :, None]   # (n, r, T)
        cdfs = ndtr(args)
        pdfs = _normpdf(args)
        # products excluding one (and two) factors via prefix/suffix scans
        n, r, _ = args.shape
        left = np.ones((n, r, T + 1))
        right = np.ones((n, r, T + 1))
        for t in range(T):
            left[:, :, t + 1] = left[:, :, t] * cdfs[:, :, t]
            right[:, :, T - 1 - t] = right[:, :, T - t] * cdfs[:, :, T - 1 - t]
        return args, cdfs, pdfs, left, right

    def _eval(V, Z, th):
        _, _, _, left, _ = _core(V, Z, th)
        return left[:, :, -1]

    def _dargs(V, Z, t):
        # d arg_t / d(sigma, beta) = (v, z_t)
        dsig = np.broadcast_to(V[None, :], (Z.shape[0], V.size))
        dbeta = np.broadcast_to(Z[:, t:t + 1], (Z.shape[0], V.size))
        return dsig, dbeta

    def _grad(V, Z, th):
        _, _, pdfs, left, right = _core(V, Z, th)
        n, r = left.shape[:2]
        g = np.zeros((n, r, 2))
        for t in range(T):
            excl = left[:, :, t] * right[:, :, t + 1]
            dsig, dbeta = _dargs(V, Z, t)
            g[:, :, 0] += pdfs[:, :, t] * excl * dsig
            g[:, :, 1] += pdfs[:, :, t] * excl * dbeta
        return g

    def _hess(V, Z, th):
        args, cdfs, pdfs, left, right = _core(V, Z, th)
        n, r = left.shape[:2]
        H = np.zeros((n, r, 2, 2))
        for t in range(T):
            excl_t = left[:, :, t] * right[:, :, t + 1]
            dt = np.stack(_dargs(V, Z, t), axis=-1)         # (n, r, 2)
            # pdf'(x) = -x pdf(x)
            curv = -args[:, :, t] * pdfs[:, :, t] * excl_t
            H += curv[..., None, None] * dt[..., :, None] * dt[..., None, :]
            for u in range(t + 1, T):
                # product over s not in {t, u}
                mid = left[:, :, u] / np.where(cdfs[:, :, t] == 0, 1.0, cdfs[:, :, t])
                mid = np.where(cdfs[:, :, t] == 0, 0.0, mid)
                excl_tu = mid * right[:, :, u + 1]
                du = np.stack(_dargs(V, Z, u), axis=-1)
                cross = pdfs[:, :, t] * pdfs[:, :, u] * excl_tu
                outer = dt[..., :, None] * du[..., None, :]
                H += cross[..., None, None] * (outer + np.swapaxes(outer, -1, -2))
        return H

    return LikelihoodIntegrand(
        name="butler_moffitt",
        dim_v=1,
        dim_theta=2,
        dim_z=T,
        theta_box=[[0.01, 10.0], [-10.0, 10.0]],
        eval=_flex(_eval, 1, T),
        grad_theta=_flex(_grad, 1, T),
        hess_theta=_flex(_hess, 1, T),
    )


# ---------------------------------------------------------------------------
# Random-coefficient regression (the smooth benchmark)
# ---------------------------------------------------------------------------


def rc_regression() -> LikelihoodIntegrand:
    """y = x*beta + eps with beta ~ N(theta, 1), eps ~ N(0, 1).

    Substituting beta = theta + v puts the parameter inside the integrand:
    phi = g(y - x*(theta + v)) with g the standard normal density;
    z = (y, x), theta scalar.
    """

    def _arg(V, Z, th):
        return (Z[:, 0:1] - Z[:, 1:2] * th[0]) - Z[:, 1:2] * V[None, :]

    def _eval(V, Z, th):
        return _normpdf(_arg(V, Z, th))

    def _grad(V, Z, th):
        a = _arg(V, Z, th)
        return (_normpdf(a) * a * Z[:, 1:2])[..., None]

    def _hess(V, Z, th):
        a = _arg(V, Z, th)
        x2 = Z[:, 1:2] ** 2
        return (_normpdf(a) * (a * a - 1.0) * x2)[..., None, None]

    return LikelihoodIntegrand(
        name="rc_regression",
        dim_v=1,
        dim_theta=1,
        dim_z=2,
        theta_box=[[-10.0, 10.0]],
        eval=_flex(_eval, 1, 2),
        grad_theta=_flex(_grad, 1, 2),
        hess_theta=_flex(_hess, 1, 2),
    )


# ---------------------------------------------------------------------------
# Accept/reject normal-CDF benchmark (non-smooth, parameter-free)
# ---------------------------------------------------------------------------


def ars_normal_cdf() -> LikelihoodIntegrand:
    """Indicator integrand 1(v <= z); the integral is the standard normal CDF.

    A pure integration benchmark: dim_theta = 0, and requesting a gradient
    or Hessian raises.  ``exact_f`` is the error-function representation
    (1 + erf(z / sqrt(2))) / 2.
    """

    def _eval(V, Z, th):
        return (V[None, :] <= Z[:, 0:1]).astype(float)

    def _unavailable(*_args, **_kw):
        raise NotImplementedError(
            "ars_normal_cdf carries no parameters; derivatives are unavailable"
        )

    def _exact(z):
        z = np.asarray(z, dtype=float)
        out = 0.5 * (1.0 + erf(z / np.sqrt(2.0)))
        return float(out) if out.ndim == 0 else out

    return LikelihoodIntegrand(
        name="ars_normal_cdf",
        dim_v=1,
        dim_theta=0,
        dim_z=1,
        theta_box=np.zeros((0, 2)),
        eval=_flex(_eval, 1, 1),
        grad_theta=_unavailable,
        hess_theta=_unavailable,
        exact_f=_exact,
        has_derivatives=False,
    )


# ---------------------------------------------------------------------------
# Data generation and persistence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    """Immutable record matrix (n, q) plus provenance metadata."""

    records: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        rec = np.atleast_2d(np.asarray(self.records, dtype=float))
        rec.setflags(write=False)
        object.__setattr__(self, "records", rec)
        if self.n < 1:
            raise ValueError("a dataset needs at least one record")

    @property
    def n(self) -> int:
        return self.records.shape[0]

    @property
    def dim_z(self) -> int:
        return self.records.shape[1]


MODEL_NAMES = (
    "mixed_logit_1d",
    "rc_logit_mv",
    "butler_moffitt",
    "rc_regression",
    "ars_normal_cdf",
)

_DEFAULT_TRUE_THETA = {
    "rc_regression": (0.0,),
    "mixed_logit_1d": (0.5, 1.0),
    "butler_moffitt": (1.0, 0.5),
    "ars_normal_cdf": (),
}


def default_true_theta(dgp: str):
    return np.asarray(_DEFAULT_TRUE_THETA[dgp], dtype=float)


def get_model(name: str, d: int = 2, T: int = 3) -> LikelihoodIntegrand:
    """Model registry used by the CLI and the experiment configs."""
    if name == "mixed_logit_1d":
        return mixed_logit_1d()
    if name == "rc_logit_mv":
        return rc_logit_mv(d)
    if name == "butler_moffitt":
        return butler_moffitt(T)
    if name == "rc_regression":
        return rc_regression()
    if name == "ars_normal_cdf":
        return ars_normal_cdf()
    raise ValueError(f"unknown model {name!r}")


def generate_dataset(dgp: str, n: int, seed: int, true_theta, T: int = 3) -> Dataset:
    """Synthetic records for one of the benchmark processes.

    Deterministic in (dgp, n, seed, true_theta): the same arguments always
    produce a bit-identical dataset.  Draw order within each process is
    fixed and documented below.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    theta = np.asarray(true_theta, dtype=float).reshape(-1)
    rng = make_generator(seed)
    if dgp == "rc_regression":
        # draws in order x, beta, eps; records are (y, x)
        x = rng.standard_normal(n)
        beta = theta[0] + rng.standard_normal(n)
        eps = rng.standard_normal(n)
        y = x * beta + eps
        records = np.column_stack([y, x])
    elif dgp == "mixed_logit_1d":
        # binary choice with coefficient N(mu, sigma^2); the signed covariate
        # z = (2y - 1) x makes the contribution logistic(z(theta1+theta2 v))
        mu, sigma = theta
        x = rng.standard_normal(n)
        b = mu + sigma * rng.standard_normal(n)
        u = rng.random(n)
        y = (u < expit(x * b)).astype(float)
        records = ((2.0 * y - 1.0) * x)[:, None]
    elif dgp == "butler_moffitt":
        # synthetic index covariates for integrand evaluation; the integrand
        # is the likelihood of an all-positive choice sequence
        records = rng.standard_normal((n, T))
    elif dgp == "ars_normal_cdf":
        records = rng.standard_normal((n, 1))
    else:
        raise ValueError(f"unknown dgp {dgp!r}")
    provenance = {
        "kind": "synthetic",
        "dgp": dgp,
        "seed": int(seed),
        "n": int(n),
        "true_theta": [float(t) for t in theta],
    }
    return Dataset(records, provenance)


def save_dataset(dataset: Dataset, path) -> None:
    """CSV with header z_1..z_q plus a provenance sidecar JSON."""
    path = Path(path)
    q = dataset.dim_z
    with open(path, "w") as fh:
        fh.write(",".join(f"z_{j + 1}" for j in range(q)) + "\n")
        for row in dataset.records:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    with open(path.with_suffix(".json"), "w") as fh:
        json.dump(dataset.provenance, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(path) -> Dataset:
    path = Path(path)
    records = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    sidecar = path.with_suffix(".json")
    if sidecar.exists():
        provenance = json.loads(sidecar.read_text())
    else:
        provenance = {"kind": "file", "path": str(path)}
    return Dataset(records, provenance)
