"""Link functions R(n) coupling rule size to sample size.

A link chooses how many integration points an estimator uses at sample size
n.  The four plain kinds (constant, logarithmic, sqrt, linear) scale a base
curve by ``a``; the two rate-backed kinds invert a decay model of the
approximation error:

    algebraic    E(r) <= c r^(-s)            ->  R(n) = ceil(c^(1/s) n^(gamma/s))
    exponential  E(r) <= c exp(-alpha r^beta) ->  R(n) = ceil(((log c)/alpha
                                                   + (gamma/alpha) log n)^(1/beta))

and require gamma > 1/2, which makes sqrt(n) * E(R(n)) vanish.  Every kind
returns an integer >= 1 and is monotone non-decreasing in n.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = ["LinkFunction", "evaluate", "total_cost", "LINK_KINDS"]

LINK_KINDS = ("constant", "logarithmic", "sqrt", "linear", "algebraic", "exponential")


@dataclass(frozen=True)
class LinkFunction:
    """One rule-size schedule; only the fields of its kind are meaningful."""

    kind: str
    a: float = 1.0
    c: float = 1.0
    s: float = 1.0
    gamma: float = 0.6
    alpha: float = 1.0
    beta: float = 1.0
    label: str = ""

    def __post_init__(self):
        if self.kind not in LINK_KINDS:
            raise ValueError(f"unknown link kind {self.kind!r}")
        if self.kind in ("algebraic", "exponential") and not self.gamma > 0.5:
            raise ValueError("algebraic/exponential links require gamma > 1/2")
        if self.kind == "algebraic" and (self.c <= 0 or self.s <= 0):
            raise ValueError("algebraic links require c > 0 and s > 0")
        if self.kind == "exponential" and (self.c <= 0 or self.alpha <= 0 or self.beta <= 0):
            raise ValueError("exponential links require c, alpha, beta > 0")
        if self.kind in ("constant", "logarithmic", "sqrt", "linear") and self.a <= 0:
            raise ValueError("scaled links require a > 0")
        if not self.label:
            object.__setattr__(self, "label", self.kind)

    def __call__(self, n: int) -> int:
        return evaluate(self, n)

    def to_json(self) -> dict:
        out = {"kind": self.kind, "label": self.label}
        if self.kind in ("constant", "logarithmic", "sqrt", "linear"):
            out["a"] = self.a
        elif self.kind == "algebraic":
            out.update(c=self.c, s=self.s, gamma=self.gamma)
        else:
            out.update(c=self.c, alpha=self.alpha, beta=self.beta, gamma=self.gamma)
        return out

    @classmethod
    def from_json(cls, payload: dict) -> "LinkFunction":
        return cls(**payload)


def evaluate(link: LinkFunction, n) -> int:
    """Rule size R(n), an integer >= 1.  ``n`` may be any real >= 1."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if link.kind == "constant":
        raw = link.a
    elif link.kind == "logarithmic":
        raw = link.a * math.log(n)
    elif link.kind == "sqrt":
        raw = link.a * math.sqrt(n)
    elif link.kind == "linear":
        raw = link.a * n
    elif link.kind == "algebraic":
        raw = link.c ** (1.0 / link.s) * n ** (link.gamma / link.s)
    else:  # exponential
        inner = math.log(link.c) / link.alpha + (link.gamma / link.alpha) * math.log(n)
        raw = max(0.0, inner) ** (1.0 / link.beta)
    return max(1, math.ceil(raw - 1e-12))


def total_cost(link: LinkFunction, n: int) -> int:
    """Integrand evaluations for one pass over the approximated objective:
    n records times R(n) nodes each."""
    return n * evaluate(link, n)
