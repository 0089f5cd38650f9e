"""Smolyak sparse-grid cubature from 1-D Gauss-Hermite rules.

The combination technique assembles the level-L rule on R^d as

    A(L, d) = sum over multi-indices l (l_i >= 1, max(d, q-d+1) <= |l| <= q)
              of (-1)^(q-|l|) * C(d-1, q-|l|) * (U_{m(l_1)} x ... x U_{m(l_d)})

with q = L + d - 1 and the linear level-to-size map m(1) = 1, m(l) = 2l - 1
(Gauss-Hermite nodes are non-nested, so exponential growth would waste
points).  Duplicate points across tensor terms are merged by coordinate
equality within 1e-12 and their weights summed; merged weights may be
negative, but always sum to 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import ResourceLimitExceeded
from .quadrature import RuleND, gauss_hermite

__all__ = ["SparseGridSpec", "smolyak", "sparse_grid_size", "level_size"]

_MERGE_DECIMALS = 12


@dataclass(frozen=True)
class SparseGridSpec:
    """Dimension, level, and size cap of a Smolyak Gauss-Hermite rule."""

    d: int
    level: int
    family: str = "gauss_hermite"
    point_cap: int = 10**6

    def __post_init__(self):
        if self.d < 1 or self.level < 1:
            raise ValueError("d and level must be positive integers")
        if self.family != "gauss_hermite":
            raise ValueError(f"unsupported sparse-grid family {self.family!r}")


def level_size(level: int) -> int:
    """1-D rule size at a given level: m(1) = 1, m(l) = 2l - 1."""
    return 1 if level == 1 else 2 * level - 1


def _combination_terms(d: int, level: int):
    """Yield (multi-index, coefficient) pairs of the combination technique."""
    q = level + d - 1
    lo = max(d, q - d + 1)

    def gen(prefix, remaining, budget):
        if remaining == 1:
            for last in range(1, budget + 1):
                yield prefix + (last,)
            return
        for head in range(1, budget - (remaining - 1) + 1):
            yield from gen(prefix + (head,), remaining - 1, budget - head)

    for idx in gen((), d, q):
        total = sum(idx)
        if total < lo:
            continue
        coeff = (-1) ** (q - total) * comb(d - 1, q - total)
        if coeff != 0:
            yield idx, float(coeff)


def _merge_key(point: np.ndarray) -> tuple:
    return tuple(np.round(point, _MERGE_DECIMALS).tolist())


def smolyak(spec: SparseGridSpec) -> RuleND:
    """Combination-technique rule; weights sum to 1 and may be negative."""
    merged: dict[tuple, tuple[np.ndarray, float]] = {}
    rules = {l: gauss_hermite(level_size(l)) for l in range(1, spec.level + 1)}
    for idx, coeff in _combination_terms(spec.d, spec.level):
        grids = np.meshgrid(*[rules[l].nodes for l in idx], indexing="ij")
        pts = np.column_stack([g.reshape(-1) for g in grids])
        w = np.ones(pts.shape[0])
        for wg in np.meshgrid(*[rules[l].weights for l in idx], indexing="ij"):
            w = w * wg.reshape(-1)
        w = coeff * w
        for p, wj in zip(pts, w):
            key = _merge_key(p)
            if key in merged:
                merged[key] = (merged[key][0], merged[key][1] + wj)
            else:
                merged[key] = (p, wj)
        if len(merged) > spec.point_cap:
            raise ResourceLimitExceeded(
                f"sparse grid exceeds point cap {spec.point_cap}"
            )
    keys = sorted(merged.keys())
    points = np.array([merged[k][0] for k in keys]).reshape(len(keys), spec.d)
    weights = np.array([merged[k][1] for k in keys])
    return RuleND(points, weights, "sparse_grid")


def sparse_grid_size(spec: SparseGridSpec) -> int:
    """Merged point count, computed without touching any integrand."""
    seen: set[tuple] = set()
    rules = {l: gauss_hermite(level_size(l)) for l in range(1, spec.level + 1)}
    for idx, _ in _combination_terms(spec.d, spec.level):
        grids = np.meshgrid(*[rules[l].nodes for l in idx], indexing="ij")
        pts = np.column_stack([g.reshape(-1) for g in grids])
        seen.update(_merge_key(p) for p in pts)
        if len(seen) > spec.point_cap:
            raise ResourceLimitExceeded(
                f"sparse grid exceeds point cap {spec.point_cap}"
            )
    return len(seen)
