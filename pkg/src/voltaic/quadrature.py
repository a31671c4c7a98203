"""Gauss-Legendre quadrature, generic over the scalar type.

Nodes and weights are plain floats; the integrand may return plain floats or
stochastic values, and the accumulation then happens in that arithmetic.  An
order-q rule integrates polynomials up to degree 2q - 1 exactly, which is what
the collocation assembly leans on: with piecewise-polynomial kernels the
matrix entries are exact up to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

__all__ = ["QuadratureRule", "gauss_legendre", "integrate"]


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights on the reference interval [-1, 1]."""

    order: int
    nodes: tuple[float, ...]
    weights: tuple[float, ...]


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> QuadratureRule:
    if order < 1:
        raise ValueError(f"order: must be >= 1, got {order}")
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return QuadratureRule(order, tuple(nodes.tolist()), tuple(weights.tolist()))


def integrate(f: Callable, lo: float, hi: float, rule: QuadratureRule):
    """Integral of f over [lo, hi]; an empty interval contributes exactly 0."""
    if lo == hi:
        return 0.0
    mid = 0.5 * (hi + lo)
    half = 0.5 * (hi - lo)
    acc = 0.0
    for x, w in zip(rule.nodes, rule.weights):
        acc = acc + f(mid + half * x) * w
    return acc * half
