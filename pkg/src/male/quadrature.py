"""Quadrature rules for integrals against the standard normal weight.

The object of interest throughout the package is

    f = integral of g(v) * omega(v) dv,    omega(v) = exp(-v^2/2) / sqrt(2*pi),

approximated by an r-point rule ``sum_j w_j g(v_j)``.  This module provides

* Gauss-Hermite rules in the probabilists' normalization (weights sum to 1,
  exact for polynomials of degree <= 2r-1 against the standard normal
  density), built by Golub-Welsch: nodes from the symmetric tridiagonal
  Jacobi matrix of the three-term recurrence, weights from the
  Christoffel sum of the orthonormal polynomial values;
* Gauss-Legendre and midpoint rules on an interval [a, b] (Lebesgue weight);
* Monte Carlo, Halton, and modified-Latin-hypercube (MLHS) rules mapped to
  the Gaussian weight through the inverse normal CDF, all with weights 1/r;
* a full tensor-product constructor used as a multivariate reference oracle.

Rules are immutable after construction (arrays are marked read-only) and can
be shared freely across threads.  ``apply`` evaluates a rule on an integrand
in fixed node order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal
from scipy.special import erfc

from .errors import NumericFailure, ResourceLimitExceeded
from .rng import make_generator

__all__ = [
    "Rule1D",
    "RuleND",
    "gauss_hermite",
    "gauss_legendre",
    "midpoint",
    "inverse_normal_cdf",
    "monte_carlo_gaussian",
    "halton",
    "mlhs",
    "product_rule",
    "apply",
    "gaussian_rule",
    "rule_nodes",
    "rule_dim",
    "METHOD_ALIASES",
]

GAUSSIAN = "gaussian_density"
LEBESGUE = "lebesgue_on_interval"

_SQRT2PI = math.sqrt(2.0 * math.pi)

# First 20 primes: Halton bases for up to 20 dimensions.
_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71)

PRODUCT_CAP = 10**7


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Rule1D:
    """One-dimensional quadrature rule: nodes, weights, and the weight kind.

    ``gaussian_density`` rules integrate against the standard normal density
    (weights sum to 1); ``lebesgue_on_interval`` rules against dv on [a, b]
    (weights sum to b - a).
    """

    nodes: np.ndarray
    weights: np.ndarray
    weight_kind: str

    def __post_init__(self):
        object.__setattr__(self, "nodes", _freeze(np.atleast_1d(self.nodes)))
        object.__setattr__(self, "weights", _freeze(np.atleast_1d(self.weights)))
        if self.nodes.ndim != 1 or self.nodes.shape != self.weights.shape:
            raise ValueError("nodes and weights must be 1-D arrays of equal length")
        if self.weight_kind not in (GAUSSIAN, LEBESGUE):
            raise ValueError(f"unknown weight_kind {self.weight_kind!r}")

    @property
    def r(self) -> int:
        return self.nodes.size


@dataclass(frozen=True)
class RuleND:
    """Multivariate rule: points of shape (r, d) and weights of shape (r,).

    Weights may be negative only for the sparse-grid construction.
    """

    points: np.ndarray
    weights: np.ndarray
    construction: str

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", _freeze(pts))
        object.__setattr__(self, "weights", _freeze(np.atleast_1d(self.weights)))
        if self.points.ndim != 2 or self.points.shape[0] != self.weights.size:
            raise ValueError("points must be (r, d) with one weight per point")
        known = ("product", "monte_carlo", "halton", "mlhs", "sparse_grid")
        if self.construction not in known:
            raise ValueError(f"unknown construction {self.construction!r}")

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def r(self) -> int:
        return self.points.shape[0]


def rule_dim(rule) -> int:
    """Integration dimension of a Rule1D or RuleND."""
    return 1 if isinstance(rule, Rule1D) else rule.d


def rule_nodes(rule) -> np.ndarray:
    """Node array in evaluation layout: (r,) when d == 1, else (r, d)."""
    if isinstance(rule, Rule1D):
        return rule.nodes
    if rule.d == 1:
        return rule.points[:, 0]
    return rule.points


# ---------------------------------------------------------------------------
# Golub-Welsch construction
# ---------------------------------------------------------------------------


_POLISH_MAX_R = 512
_CHRISTOFFEL_CAP = 1e250


def _christoffel_sum(x, bvals, mu0):
    """Christoffel sum S(x) = sum_{k<r} p_k(x)^2 of the orthonormal recurrence
    with coefficients a_k = 0, b_k = bvals[k].

    The weight of a Gauss node x_j is 1/S(x_j).  Nodes whose partial sum
    exceeds 1e250 carry weights below any physically relevant double; they
    are frozen and reported with S = inf (weight exactly 0).
    """
    r = bvals.size - 1
    n = x.size
    s = np.full(n, 1.0 / mu0)
    if r == 1:
        return s
    a = np.full(n, 1.0 / math.sqrt(mu0))  # p_{k-1}
    b = x * a / bvals[1]                  # p_k
    c = np.empty(n)
    tmp = np.empty(n)
    dead = None
    for k in range(1, r):
        np.multiply(b, b, out=tmp)
        s += tmp
        np.multiply(x, b, out=c)
        a *= bvals[k]
        c -= a
        c *= 1.0 / bvals[k + 1]
        a, b, c = b, c, a
        if k % 16 == 0 and s[0] > _CHRISTOFFEL_CAP:
            # the most extreme node sorts first, so s[0] overflows earliest
            dead = s > _CHRISTOFFEL_CAP
            a[dead] = 0.0
            b[dead] = 0.0
    if dead is not None:
        s[dead] = np.inf
    return s


def _newton_polish(x, bvals, mu0):
    """One Newton step on p_r per node (used for small r only)."""
    r = bvals.size - 1
    if r == 1:
        return x
    pkm1 = np.full_like(x, 1.0 / math.sqrt(mu0))
    dkm1 = np.zeros_like(x)
    pk = x * pkm1 / bvals[1]
    dk = pkm1 / bvals[1]
    for k in range(1, r):
        inv = 1.0 / bvals[k + 1]
        pnew = (x * pk - bvals[k] * pkm1) * inv
        dnew = (pk + x * dk - bvals[k] * dkm1) * inv
        pkm1, pk = pk, pnew
        dkm1, dk = dk, dnew
    step = np.where(dk != 0.0, pk / np.where(dk == 0.0, 1.0, dk), 0.0)
    return x - np.clip(step, -1e-8, 1e-8)


def _golub_welsch(r, bfun, mu0):
    """Nodes and weights of the Gauss rule with recurrence coefficients
    a_k = 0, b_k = bfun(k) and zeroth moment mu0."""
    if r == 1:
        return np.array([0.0]), np.array([mu0])
    bvals = np.array([math.nan] + [bfun(k) for k in range(1, r + 1)])
    try:
        x = eigvalsh_tridiagonal(np.zeros(r), bvals[1:r], lapack_driver="sterf")
    except Exception as exc:  # LAPACK non-convergence
        raise NumericFailure(f"tridiagonal eigensolver failed for r={r}") from exc
    if r <= _POLISH_MAX_R:
        # sharpen the eigenvalues to machine-precision roots of p_r
        x = _newton_polish(x, bvals, mu0)
    # Recurrence centers are at 0 for both families used here: enforce exact
    # symmetry of the node set.
    x = 0.5 * (x - x[::-1])
    if r % 2 == 1:
        x[r // 2] = 0.0
    s = _christoffel_sum(x, bvals, mu0)
    with np.errstate(divide="ignore"):
        w = 1.0 / s
    w[~np.isfinite(w)] = 0.0
    w = 0.5 * (w + w[::-1])
    return x, w


@lru_cache(maxsize=128)
def gauss_hermite(r: int) -> Rule1D:
    """Gauss-Hermite rule in the probabilists' normalization.

    Exact for polynomials of degree <= 2r-1 against the standard normal
    density; weights are positive and sum to 1 (extreme weights below the
    double range underflow to exactly 0 for very large r).
    """
    if r < 1:
        raise ValueError("r must be a positive integer")
    x, w = _golub_welsch(int(r), lambda k: math.sqrt(k), 1.0)
    return Rule1D(x, w, GAUSSIAN)


@lru_cache(maxsize=128)
def _legendre_unit(r: int) -> tuple[np.ndarray, np.ndarray]:
    # Gauss-Legendre on [-1, 1] against dv (mu0 = 2).
    x, w = _golub_welsch(int(r), lambda k: k / math.sqrt(4.0 * k * k - 1.0), 2.0)
    return _freeze(x), _freeze(w)


def gauss_legendre(r: int, a: float, b: float) -> Rule1D:
    """Gauss-Legendre rule on [a, b]: exact for degree <= 2r-1, weights sum to b-a."""
    if r < 1:
        raise ValueError("r must be a positive integer")
    if not a < b:
        raise ValueError("interval endpoints must satisfy a < b")
    x, w = _legendre_unit(int(r))
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return Rule1D(mid + half * x, half * w, LEBESGUE)


def midpoint(r: int, a: float, b: float) -> Rule1D:
    """Composite midpoint rule: nodes at cell centers of a uniform partition."""
    if r < 1:
        raise ValueError("r must be a positive integer")
    if not a < b:
        raise ValueError("interval endpoints must satisfy a < b")
    h = (b - a) / r
    nodes = a + h * (np.arange(r) + 0.5)
    return Rule1D(nodes, np.full(r, h), LEBESGUE)


# ---------------------------------------------------------------------------
# Inverse normal CDF
# ---------------------------------------------------------------------------

# Rational initializer coefficients (Acklam), |relative error| < 1.2e-9,
# refined below by one Halley step against an erfc evaluation.
_PPF_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
          1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_PPF_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
          6.680131188771972e+01, -1.328068155288572e+01)
_PPF_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
          -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_PPF_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
          3.754408661907416e+00)
_PPF_SPLIT = 0.02425


def _ppf_lower(p: np.ndarray) -> np.ndarray:
    """Quantile for p in (0, 0.5]; returns x <= 0."""
    x = np.empty_like(p)
    tail = p < _PPF_SPLIT
    if tail.any():
        q = np.sqrt(-2.0 * np.log(p[tail]))
        a0, a1, a2, a3, a4, a5 = _PPF_C
        b0, b1, b2, b3 = _PPF_D
        num = ((((a0 * q + a1) * q + a2) * q + a3) * q + a4) * q + a5
        den = (((b0 * q + b1) * q + b2) * q + b3) * q + 1.0
        x[tail] = num / den
    if (~tail).any():
        q = p[~tail] - 0.5
        s = q * q
        a0, a1, a2, a3, a4, a5 = _PPF_A
        b0, b1, b2, b3, b4 = _PPF_B
        num = ((((a0 * s + a1) * s + a2) * s + a3) * s + a4) * s + a5
        den = ((((b0 * s + b1) * s + b2) * s + b3) * s + b4) * s + 1.0
        x[~tail] = q * num / den
    # One Halley step on Phi(x) - p (Phi via erfc keeps full relative
    # accuracy in the lower tail).
    err = 0.5 * erfc(-x / math.sqrt(2.0)) - p
    u = err * _SQRT2PI * np.exp(0.5 * x * x)
    x = x - u / (1.0 + 0.5 * x * u)
    return x


def inverse_normal_cdf(u):
    """Quantile function of the standard normal distribution.

    Absolute error is below 1e-13 for u in [1e-300, 1 - 1e-16], and
    inverse_normal_cdf(1 - u) == -inverse_normal_cdf(u) exactly, because the
    upper half is evaluated by mirroring (1 - u is exact in doubles for
    u >= 0.5).  Scalar input returns a float; arrays map elementwise.
    """
    arr = np.asarray(u, dtype=float)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise ValueError("u must lie strictly inside (0, 1)")
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    lower = arr <= 0.5
    p = np.where(lower, arr, 1.0 - arr)
    x = _ppf_lower(p)
    out = np.where(lower, x, -x)
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Stochastic and quasi-random rules under the Gaussian weight
# ---------------------------------------------------------------------------


def monte_carlo_gaussian(r: int, d: int, seed: int) -> RuleND:
    """r i.i.d. standard-normal d-vectors with equal weights 1/r.

    Deterministic in the seed: the same (r, d, seed) always yields a
    bit-identical rule.
    """
    if r < 1 or d < 1:
        raise ValueError("r and d must be positive integers")
    rng = make_generator(seed)
    pts = rng.standard_normal((int(r), int(d)))
    return RuleND(pts, np.full(r, 1.0 / r), "monte_carlo")


def radical_inverse(indices, base: int) -> np.ndarray:
    """Digit-reversal (van der Corput) map of the given indices in ``base``."""
    idx = np.atleast_1d(np.asarray(indices, dtype=np.int64)).copy()
    if np.any(idx < 0):
        raise ValueError("indices must be nonnegative")
    out = np.zeros(idx.shape, dtype=float)
    f = 1.0 / base
    while np.any(idx > 0):
        out += f * (idx % base)
        idx //= base
        f /= base
    return out


def halton(r: int, d: int, skip: int = 1) -> RuleND:
    """Halton points in the first d prime bases, mapped to the Gaussian weight.

    Points are the radical-inverse values at indices skip .. skip+r-1 pushed
    coordinatewise through the inverse normal CDF; weights are 1/r.  The
    default skip=1 drops index 0, whose image is the origin of the unit cube
    and maps to -inf.
    """
    if r < 1 or d < 1:
        raise ValueError("r and d must be positive integers")
    if d > len(_PRIMES):
        raise ValueError(f"halton supports at most {len(_PRIMES)} dimensions")
    if skip < 0:
        raise ValueError("skip must be nonnegative")
    idx = np.arange(skip, skip + r, dtype=np.int64)
    unit = np.column_stack([radical_inverse(idx, _PRIMES[k]) for k in range(d)])
    pts = inverse_normal_cdf(unit.reshape(-1)).reshape(r, d)
    return RuleND(pts, np.full(r, 1.0 / r), "halton")


def mlhs(r: int, d: int, seed: int) -> RuleND:
    """Modified Latin hypercube rule under the Gaussian weight.

    Each coordinate is the shifted grid (i + u)/r, i = 0..r-1, with one
    uniform shift u per coordinate, independently permuted across
    coordinates, then mapped through the inverse normal CDF; weights 1/r.
    """
    if r < 1 or d < 1:
        raise ValueError("r and d must be positive integers")
    rng = make_generator(seed)
    cols = []
    base = np.arange(r, dtype=float)
    for _ in range(d):
        u = rng.random()
        col = (base + u) / r
        cols.append(col[rng.permutation(r)])
    unit = np.column_stack(cols)
    pts = inverse_normal_cdf(unit.reshape(-1)).reshape(r, d)
    return RuleND(pts, np.full(r, 1.0 / r), "mlhs")


def product_rule(rule: Rule1D, d: int) -> RuleND:
    """Full tensor product of a 1-D rule: r^d points with product weights."""
    if d < 1:
        raise ValueError("d must be a positive integer")
    if rule.r**d > PRODUCT_CAP:
        raise ResourceLimitExceeded(
            f"tensor product would have {rule.r}^{d} > {PRODUCT_CAP} points"
        )
    grids = np.meshgrid(*([rule.nodes] * d), indexing="ij")
    pts = np.column_stack([g.reshape(-1) for g in grids])
    wgrids = np.meshgrid(*([rule.weights] * d), indexing="ij")
    w = np.ones(rule.r**d)
    for g in wgrids:
        w = w * g.reshape(-1)
    return RuleND(pts, w, "product")


# ---------------------------------------------------------------------------
# Rule application
# ---------------------------------------------------------------------------


def apply(rule, g, compensated: bool = False) -> float:
    """Evaluate sum_j w_j g(v_j) in fixed node order.

    ``g`` is called once on the full node array ((r,) for 1-D rules, (r, d)
    otherwise) and may return a scalar for constant integrands; a per-node
    fallback covers non-vectorized callables.  Non-finite integrand values
    raise NumericFailure carrying the offending node.  ``compensated``
    switches to exactly rounded summation (off by default so that results
    are plain fixed-order dot products).
    """
    nodes = rule_nodes(rule)
    r = rule.r
    try:
        vals = np.asarray(g(nodes), dtype=float)
        if vals.ndim == 0:
            vals = np.full(r, float(vals))
        if vals.shape != (r,):
            raise ValueError
    except (TypeError, ValueError):
        vals = np.array([float(g(v)) for v in nodes])
    if not np.all(np.isfinite(vals)):
        bad = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise NumericFailure(f"integrand is not finite at node {nodes[bad]!r}")
    if compensated:
        return math.fsum(float(w) * float(v) for w, v in zip(rule.weights, vals))
    return float(np.dot(rule.weights, vals))


# ---------------------------------------------------------------------------
# Family registry: every method the experiments exercise, as a rule under
# the Gaussian weight.
# ---------------------------------------------------------------------------

METHOD_ALIASES = {
    "gh": "gh", "hermite": "gh", "gauss_hermite": "gh",
    "gl": "gl", "legendre": "gl", "gauss_legendre": "gl",
    "midpoint": "midpoint",
    "mc": "mc", "monte_carlo": "mc",
    "halton": "halton",
    "mlhs": "mlhs",
    "sparse": "sparse", "sparse_grid": "sparse",
}

_DETERMINISTIC = {"gh", "gl", "midpoint", "halton", "sparse"}


def is_stochastic(method: str) -> bool:
    return METHOD_ALIASES[method] not in _DETERMINISTIC


def _as_nd(rule1d: Rule1D) -> RuleND:
    return RuleND(rule1d.nodes[:, None], rule1d.weights, "product")


def gaussian_rule(method: str, r: int, d: int = 1, seed: int = 0,
                  skip: int = 1, level: int | None = None) -> RuleND:
    """Construct an r-point rule of the named family under the Gaussian weight.

    Interval families (Gauss-Legendre, midpoint) are built on (0, 1) and
    composed with the inverse normal CDF, weights unchanged; this avoids any
    truncation parameter.  ``sparse`` builds the Smolyak combination rule and
    interprets ``level`` (not r) as the accuracy parameter.
    """
    fam = METHOD_ALIASES.get(method)
    if fam is None:
        raise ValueError(f"unknown method {method!r}")
    if fam == "sparse":
        from .sparse_grid import SparseGridSpec, smolyak

        return smolyak(SparseGridSpec(d=d, level=int(level if level is not None else r)))
    if fam == "gh":
        base = gauss_hermite(r)
        return _as_nd(base) if d == 1 else product_rule(base, d)
    if fam in ("gl", "midpoint"):
        base = gauss_legendre(r, 0.0, 1.0) if fam == "gl" else midpoint(r, 0.0, 1.0)
        mapped = Rule1D(inverse_normal_cdf(base.nodes), base.weights, GAUSSIAN)
        return _as_nd(mapped) if d == 1 else product_rule(mapped, d)
    if fam == "mc":
        return monte_carlo_gaussian(r, d, seed)
    if fam == "halton":
        return halton(r, d, skip)
    if fam == "mlhs":
        return mlhs(r, d, seed)
    raise AssertionError(fam)
