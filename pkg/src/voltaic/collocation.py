"""Taylor collocation for first-kind Volterra equations.

The unknown is approximated by its degree-n Taylor polynomial at a point c,
and the integral equation is enforced at n+1 uniformly spaced collocation
points.  Entry (i, j) of the dense system is

    A[i][j] = (1/j!) * sum_p  integral of K_p(r_i, s) (s - c)^j ds

over the p-th kernel band clipped to [a, r_i], so the unknown vector holds
the raw derivatives x^(j)(c).  The collocation points are shifted off the
left endpoint (r_i = a + (b-a)(i+1)/(n+1)): a point at r = a would produce
an identically zero row whenever a = 0, since both the integral and f
vanish there.

Everything is generic over the scalar: pass a StochasticContext and the
assembly, elimination, and evaluation all run in stochastic arithmetic, so
a solution value carries its own round-off distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import VolterraProblem
from .linalg import DenseSystem, lu_solve
from .quadrature import gauss_legendre
from .stochastic import StochasticContext

__all__ = [
    "MAX_DEGREE",
    "CollocationConfig",
    "TaylorSolution",
    "collocation_points",
    "assemble",
    "solve",
    "evaluate_solution",
    "collocation_residual",
]

MAX_DEGREE = 25  # monomial-basis conditioning is hopeless beyond this
MIN_QUADRATURE_ORDER = 16


@dataclass(frozen=True)
class CollocationConfig:
    """Solver knobs: Taylor degree, solving interval, expansion point.

    ``expansion_point=None`` means the interval midpoint.  The quadrature
    order defaults to max(16, degree + 2) per kernel band, which is exact
    for piecewise-polynomial kernels and generous for smooth ones.
    """

    degree: int
    interval: tuple[float, float]
    expansion_point: float | None = None
    quadrature_order: int | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.degree, int) or isinstance(self.degree, bool):
            raise ValueError(f"degree: must be an integer, got {self.degree!r}")
        if not 0 <= self.degree <= MAX_DEGREE:
            raise ValueError(f"degree: must be in [0, {MAX_DEGREE}], got {self.degree}")
        a, b = self.interval
        if not (math.isfinite(a) and math.isfinite(b) and a < b):
            raise ValueError(f"interval: need finite a < b, got ({a!r}, {b!r})")
        c = self.expansion_point
        if c is not None and not (a <= c <= b):
            raise ValueError(f"expansion_point: {c!r} outside interval [{a}, {b}]")
        q = self.quadrature_order
        if q is not None and q < 1:
            raise ValueError(f"quadrature_order: must be >= 1, got {q}")

    @property
    def center(self) -> float:
        a, b = self.interval
        return 0.5 * (a + b) if self.expansion_point is None else float(self.expansion_point)

    @property
    def order(self) -> int:
        if self.quadrature_order is not None:
            return self.quadrature_order
        return max(MIN_QUADRATURE_ORDER, self.degree + 2)


def collocation_points(a: float, b: float, degree: int) -> tuple[float, ...]:
    """Uniform points shifted off the left endpoint: strictly inside (a, b]."""
    if not b > a:
        raise ValueError(f"need a < b, got ({a!r}, {b!r})")
    if degree < 0:
        raise ValueError(f"degree: must be >= 0, got {degree}")
    span = b - a
    m = degree + 1
    # the last point is pinned to b: (span*m)/m can land one ulp past it
    return tuple(a + (span * (i + 1)) / m for i in range(m - 1)) + (b,)


@dataclass(frozen=True)
class TaylorSolution:
    """Raw derivatives x^(j)(c) plus the evaluation rule.

    Entries of ``derivatives`` are plain floats or StochasticValues,
    depending on how the solve was run.
    """

    derivatives: tuple
    center: float
    degree: int
    interval: tuple[float, float]

    def __post_init__(self) -> None:
        if len(self.derivatives) != self.degree + 1:
            raise ValueError(
                f"derivatives: expected {self.degree + 1} entries, got {len(self.derivatives)}"
            )

    def __call__(self, s: float):
        return evaluate_solution(self, s)

    def coefficient_floats(self) -> tuple[float, ...]:
        """Taylor coefficients x^(j)(c)/j! as plain floats (means if stochastic)."""
        return tuple(
            float(d) / float(math.factorial(j)) for j, d in enumerate(self.derivatives)
        )

    def evaluate_many(self, s: np.ndarray) -> np.ndarray:
        """Vectorized plain-float evaluation on an array of points."""
        return np.polynomial.polynomial.polyval(
            np.asarray(s, dtype=float) - self.center, self.coefficient_floats()
        )


def evaluate_solution(sol: TaylorSolution, s: float):
    """Horner evaluation of the Taylor polynomial in (s - c)."""
    ds = float(s) - sol.center
    n = sol.degree
    acc = sol.derivatives[n] / float(math.factorial(n))
    for j in range(n - 1, -1, -1):
        acc = acc * ds + sol.derivatives[j] / float(math.factorial(j))
    return acc


def assemble(
    problem: VolterraProblem,
    cfg: CollocationConfig,
    ctx: StochasticContext | None = None,
) -> DenseSystem:
    """Build the dense collocation system A V = F.

    With a stochastic context the matrix entries, right-hand side, and all
    later elimination work are stochastic values; without one everything is
    plain floats.  Kernel bands are clipped to [a, r_i], so on a marching
    sub-interval only the part of the operator acting on the unknown is
    assembled (history belongs in the right-hand side).
    """
    a, b = cfg.interval
    pa, pb = problem.interval
    if (float(pa), float(pb)) != (float(a), float(b)):
        raise ValueError(
            f"interval mismatch: problem has ({pa!r}, {pb!r}), config has ({a!r}, {b!r})"
        )
    n = cfg.degree
    c = cfg.center
    rule = gauss_legendre(cfg.order)
    lift = ctx.exact if ctx is not None else float

    matrix = []
    rhs = []
    for r in collocation_points(a, b, n):
        cols = [lift(0.0) for _ in range(n + 1)]
        for piece in problem.kernel.pieces:
            lo = max(float(piece.lower(r)), a)
            hi = min(float(piece.upper(r)), r)
            if not hi > lo:
                continue
            mid = 0.5 * (hi + lo)
            half = 0.5 * (hi - lo)
            for xq, wq in zip(rule.nodes, rule.weights):
                s = mid + half * xq
                kw = piece.rate(r, s) * (wq * half)
                if kw == 0.0:
                    continue
                term = lift(kw)
                cols[0] = cols[0] + term
                if n:
                    base = lift(s) - c
                    for j in range(1, n + 1):
                        term = term * base
                        cols[j] = cols[j] + term
        for j in range(2, n + 1):
            cols[j] = cols[j] / float(math.factorial(j))
        matrix.append(cols)
        rhs.append(lift(float(problem.rhs(r))))
    return DenseSystem(matrix, rhs)


def solve(
    problem: VolterraProblem,
    cfg: CollocationConfig,
    ctx: StochasticContext | None = None,
) -> TaylorSolution:
    """Assemble and eliminate; returns the Taylor solution on cfg.interval."""
    derivs = lu_solve(assemble(problem, cfg, ctx))
    return TaylorSolution(
        derivatives=tuple(derivs),
        center=cfg.center,
        degree=cfg.degree,
        interval=(float(cfg.interval[0]), float(cfg.interval[1])),
    )


def collocation_residual(
    problem: VolterraProblem, cfg: CollocationConfig, sol: TaylorSolution
) -> float:
    """Max defect of the collocation equations, evaluated in plain floats.

    Re-integrates the solved polynomial against the kernel at every
    collocation point and compares with f there; the solve postcondition is
    residual <= 1e-8 * max|f(r_i)| on well-conditioned problems.
    """
    a, b = cfg.interval
    rule = gauss_legendre(cfg.order)
    coeffs = sol.coefficient_floats()

    def xhat(s: float) -> float:
        acc = coeffs[-1]
        for q in reversed(coeffs[:-1]):
            acc = acc * (s - sol.center) + q
        return acc

    worst = 0.0
    for r in collocation_points(a, b, cfg.degree):
        acc = 0.0
        for piece in problem.kernel.pieces:
            lo = max(float(piece.lower(r)), a)
            hi = min(float(piece.upper(r)), r)
            if not hi > lo:
                continue
            mid = 0.5 * (hi + lo)
            half = 0.5 * (hi - lo)
            acc += half * sum(
                piece.rate(r, mid + half * xq) * xhat(mid + half * xq) * wq
                for xq, wq in zip(rule.nodes, rule.weights)
            )
        worst = max(worst, abs(acc - float(problem.rhs(r))))
    return worst
