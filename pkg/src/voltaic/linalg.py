"""Dense LU solving with partial pivoting, generic over the scalar type.

The same elimination runs on plain floats and on stochastic values; only the
singularity test differs.  A plain pivot is singular when it falls below
1e-13 times the max-norm of the matrix.  A stochastic pivot is singular when
it is an informatical zero: all of its digits are noise, so dividing by it
would manufacture meaningless output.  That event is also recorded in the
context's instability log.

Matrices here are small (collocation systems, a few dozen rows), so clarity
beats blocking and the loops stay pure Python.
"""

from __future__ import annotations

from dataclasses import dataclass

from .stochastic import StochasticValue

__all__ = ["DenseSystem", "SingularMatrixError", "lu_solve"]

PIVOT_FLOOR = 1e-13


class SingularMatrixError(ArithmeticError):
    """Elimination hit a pivot that is zero (exactly, or informatically)."""


@dataclass
class DenseSystem:
    """A square system ``matrix @ unknowns = rhs`` in row-major lists."""

    matrix: list[list]
    rhs: list

    def __post_init__(self) -> None:
        n = len(self.matrix)
        if n == 0:
            raise ValueError("matrix: must be non-empty")
        if any(len(row) != n for row in self.matrix):
            raise ValueError("matrix: must be square")
        if len(self.rhs) != n:
            raise ValueError(f"rhs: expected {n} entries, got {len(self.rhs)}")


def _mag(x) -> float:
    return abs(float(x))


def lu_solve(system: DenseSystem) -> list:
    """Solve by LU with partial pivoting; returns the unknowns as a list."""
    n = len(system.rhs)
    a = [list(row) for row in system.matrix]
    b = list(system.rhs)

    norm = max(sum(_mag(x) for x in row) for row in a)
    if norm == 0.0:
        raise SingularMatrixError("matrix is identically zero")

    for k in range(n):
        piv_row = max(range(k, n), key=lambda r: _mag(a[r][k]))
        pivot = a[piv_row][k]
        if isinstance(pivot, StochasticValue):
            if pivot.is_zero():
                pivot.ctx._log("informatical-zero-pivot")
                raise SingularMatrixError(
                    f"pivot in column {k} is an informatical zero"
                )
        elif _mag(pivot) < PIVOT_FLOOR * norm:
            raise SingularMatrixError(
                f"pivot in column {k} is {_mag(pivot):.3e}, "
                f"below {PIVOT_FLOOR:g} * norm ({norm:.3e})"
            )
        if piv_row != k:
            a[k], a[piv_row] = a[piv_row], a[k]
            b[k], b[piv_row] = b[piv_row], b[k]
        for r in range(k + 1, n):
            if _mag(a[r][k]) == 0.0:
                continue
            factor = a[r][k] / pivot
            for c in range(k + 1, n):
                a[r][c] = a[r][c] - factor * a[k][c]
            b[r] = b[r] - factor * b[k]

    x = [None] * n
    for k in range(n - 1, -1, -1):
        acc = b[k]
        for c in range(k + 1, n):
            acc = acc - a[k][c] * x[c]
        x[k] = acc / a[k][k]
    return x
