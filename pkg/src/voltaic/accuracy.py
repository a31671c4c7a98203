"""Degree escalation controlled by stochastic arithmetic.

The solver is re-run with increasing Taylor degree, every run in the same
stochastic context, and the successive difference |v_n - v_prev| at a probe
point is tested for informatical zero: once the difference carries no
significant digits it is pure round-off, so the previous degree already hit
the attainable accuracy.  The report rows (degree, value, difference)
mirror the usual convergence-table layout; the first computed row has no
difference entry.

A lone informatical zero early in the escalation can be a fluke, so it
needs a confirming zero at the next degree; past n_min + 3 the first zero
is accepted as-is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .collocation import CollocationConfig, TaylorSolution, solve
from .kernels import VolterraProblem
from .linalg import SingularMatrixError
from .stochastic import (
    DsaConfig,
    StochasticContext,
    StochasticValue,
    ncsd_pair,
    significant_string,
)

__all__ = [
    "DegreeRow",
    "OptimalResult",
    "optimal_solve",
    "report_csv",
    "GapRow",
    "ncsd_gap",
]

DEFAULT_N_MIN = 2
DEFAULT_N_MAX = 15


@dataclass(frozen=True)
class DegreeRow:
    """One escalation step: probe value at this degree and the step difference."""

    degree: int
    value: StochasticValue
    diff: StochasticValue | None  # |v_n - v_prev|; None on the first computed row

    @property
    def diff_is_zero(self) -> bool:
        return self.diff is not None and self.diff.is_zero()


@dataclass(frozen=True)
class OptimalResult:
    """Escalation outcome: the degree past which more work adds only noise."""

    rows: tuple[DegreeRow, ...]
    optimal_degree: int
    converged: bool
    solution: TaylorSolution
    probe: float
    skipped_degrees: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not any(r.degree == self.optimal_degree for r in self.rows):
            raise ValueError(f"optimal_degree {self.optimal_degree} has no row")

    @property
    def optimal_row(self) -> DegreeRow:
        return next(r for r in self.rows if r.degree == self.optimal_degree)

    @property
    def optimal_value(self) -> str:
        return significant_string(self.optimal_row.value)

    @property
    def optimal_error(self) -> str:
        """Last difference that still carried significant digits.

        When every difference up to the stop was already informatical zero
        (polynomial-exact problems) this degenerates to "@.0".
        """
        last = None
        for row in self.rows:
            if row.degree > self.optimal_degree:
                break
            if row.diff is not None and not row.diff.is_zero():
                last = row.diff
        if last is None:
            return "@.0"
        return significant_string(last)


def optimal_solve(
    problem: VolterraProblem,
    probe: float,
    n_min: int = DEFAULT_N_MIN,
    n_max: int = DEFAULT_N_MAX,
    dsa: DsaConfig | None = None,
    *,
    expansion_point: float | None = None,
    quadrature_order: int | None = None,
) -> OptimalResult:
    """Escalate the Taylor degree until the probe value stops moving.

    Solves under stochastic arithmetic for n = n_min, n_min+1, ... and stops
    at the first degree whose difference from the previous value is an
    informatical zero (with the confirmation rule for early zeros).  Degrees
    whose collocation matrix is singular are skipped and recorded.  If n_max
    is reached without a stop the result is flagged not-converged and the
    degree with the smallest difference is reported.
    """
    a, b = problem.interval
    if not a < probe <= b:
        raise ValueError(f"probe: {probe!r} outside ({a!r}, {b!r}]")
    if n_min < 0:
        raise ValueError(f"n_min: must be >= 0, got {n_min}")
    if n_max < n_min + 1:
        raise ValueError(f"n_max: must be >= n_min + 1, got {n_max}")

    cfg = dsa if dsa is not None else DsaConfig()
    ctx = StochasticContext(cfg)

    rows: list[DegreeRow] = []
    solutions: dict[int, TaylorSolution] = {}
    skipped: list[int] = []
    prev_value: StochasticValue | None = None
    stop_degree: int | None = None
    pending: int | None = None

    for n in range(n_min, n_max + 1):
        coll = CollocationConfig(
            degree=n,
            interval=problem.interval,
            expansion_point=expansion_point,
            quadrature_order=quadrature_order,
        )
        try:
            with ctx.region(f"degree-{n}"):
                sol = solve(problem, coll, ctx)
                v = sol(probe)
        except SingularMatrixError:
            skipped.append(n)
            continue
        solutions[n] = sol
        diff = abs(v - prev_value) if prev_value is not None else None
        rows.append(DegreeRow(degree=n, value=v, diff=diff))
        prev_value = v

        if diff is not None and diff.is_zero():
            if n >= n_min + 3:
                stop_degree = n
                break
            if pending is not None:
                stop_degree = pending
                break
            pending = n
        else:
            pending = None

    if not solutions:
        raise SingularMatrixError(
            f"every degree in [{n_min}, {n_max}] produced a singular system"
        )

    if stop_degree is None and pending is not None:
        # a zero on the last computed degree never got its confirming step
        stop_degree = pending

    if stop_degree is not None:
        return OptimalResult(
            rows=tuple(rows),
            optimal_degree=stop_degree,
            converged=True,
            solution=solutions[stop_degree],
            probe=float(probe),
            skipped_degrees=tuple(skipped),
        )

    # no informatical zero: report the degree whose step moved the least
    with_diff = [r for r in rows if r.diff is not None]
    best = min(with_diff, key=lambda r: float(r.diff)) if with_diff else rows[-1]
    return OptimalResult(
        rows=tuple(rows),
        optimal_degree=best.degree,
        converged=False,
        solution=solutions[best.degree],
        probe=float(probe),
        skipped_degrees=tuple(skipped),
    )


def report_csv(result: OptimalResult) -> str:
    """Convergence-table report: n, probe value, successive difference."""
    lines = ["n,value,diff"]
    for row in result.rows:
        diff = "" if row.diff is None else significant_string(row.diff)
        lines.append(f"{row.degree},{significant_string(row.value)},{diff}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class GapRow:
    """Per-degree agreement between the two accuracy estimates.

    ``vs_exact`` counts digits shared with the analytic solution,
    ``vs_next`` digits shared with the next-degree approximation; their gap
    is what makes the successive difference a usable error estimate.
    """

    degree: int
    vs_exact: float
    vs_next: float

    @property
    def gap(self) -> float:
        if math.isinf(self.vs_exact) and math.isinf(self.vs_next):
            return 0.0
        return abs(self.vs_exact - self.vs_next)


def ncsd_gap(
    problem: VolterraProblem,
    exact: Callable[[float], float],
    probe: float,
    degrees: Iterable[int],
    *,
    expansion_point: float | None = None,
) -> tuple[GapRow, ...]:
    """Compare digits-vs-exact with digits-vs-next-degree, in plain floats.

    Requires the analytic solution; used to check that stopping on the
    successive difference estimates the true error faithfully.
    """
    degs = sorted(set(int(n) for n in degrees))
    if not degs:
        raise ValueError("degrees: need at least one degree")
    values: dict[int, float] = {}
    for n in degs + [degs[-1] + 1]:
        if n in values:
            continue
        coll = CollocationConfig(
            degree=n, interval=problem.interval, expansion_point=expansion_point
        )
        values[n] = float(solve(problem, coll)(probe))
    x_true = float(exact(probe))
    out = []
    for n in degs:
        out.append(
            GapRow(
                degree=n,
                vs_exact=ncsd_pair(values[n], x_true),
                vs_next=ncsd_pair(values[n], values[n + 1]),
            )
        )
    return tuple(out)
