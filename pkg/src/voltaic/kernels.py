"""Piecewise kernels for first-kind Volterra equations.

The kernel of the integral operator is allowed to jump across a chain of
boundary curves

    0 = a0(t) <= a1(t) <= ... <= am(t) = t,

with a separate smooth rate on each band.  The band that touches the
diagonal must not vanish there (K(t, t) != 0), otherwise the first-kind
equation loses its solvability.  Band membership is half-open: a point s
belongs to the band whose interval [a_{p-1}(t), a_p(t)) contains it, except
that s = t belongs to the last band.  On an interior breakpoint the band to
the right wins.

``piecewise_constant`` builds the common case of constant efficiencies
separated by fixed fractions of t; the bundled storage model is
``piecewise_constant([1.0, 0.9, 0.85], [0.25, 0.75])``: full efficiency for
the oldest quarter of the history, 0.9 for the middle half, 0.85 near the
diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

__all__ = [
    "BoundaryCurve",
    "KernelPiece",
    "PiecewiseKernel",
    "VolterraProblem",
    "Violation",
    "OutOfDomainError",
    "BadFractionsError",
    "piecewise_constant",
]

CHAIN_TOLERANCE = 1e-12


class OutOfDomainError(ValueError):
    """Kernel evaluated outside the triangle 0 <= s <= t."""


class BadFractionsError(ValueError):
    """Band fractions must be strictly increasing inside (0, 1)."""


@dataclass(frozen=True)
class BoundaryCurve:
    """One boundary of a kernel band: s = curve(t).

    ``fraction`` is set when the curve is the ray s = fraction * t; several
    fast paths (band clipping, breakpoint preimages, the gridded reference
    solver) only exist for that family.
    """

    rule: Callable[[float], float]
    fraction: float | None = None

    def __call__(self, t: float) -> float:
        return self.rule(t)

    @classmethod
    def of_fraction(cls, fraction: float) -> "BoundaryCurve":
        f = float(fraction)
        return cls(rule=lambda t: f * t, fraction=f)


@dataclass(frozen=True)
class KernelPiece:
    """A band between two boundary curves with its own rate K(t, s)."""

    lower: BoundaryCurve
    upper: BoundaryCurve
    rate: Callable[[float, float], float]
    constant: float | None = None  # set when the rate does not depend on (t, s)


@dataclass(frozen=True)
class Violation:
    """One defect found while validating a kernel chain."""

    t: float
    kind: str
    detail: str


@dataclass(frozen=True)
class PiecewiseKernel:
    pieces: tuple[KernelPiece, ...]

    def __post_init__(self) -> None:
        if not self.pieces:
            raise ValueError("pieces: need at least one band")

    @property
    def fractions(self) -> tuple[float, ...] | None:
        """Interior breakpoint fractions, when every boundary is a ray."""
        fl = [p.lower.fraction for p in self.pieces]
        fu = [p.upper.fraction for p in self.pieces]
        if any(f is None for f in fl + fu):
            return None
        return tuple(fu[:-1])

    def evaluate(self, t: float, s: float) -> float:
        """Rate at (t, s); raises OutOfDomainError outside 0 <= s <= t."""
        if s < 0.0 or s > t:
            raise OutOfDomainError(f"point (t={t!r}, s={s!r}) is outside 0 <= s <= t")
        last = len(self.pieces) - 1
        for p, piece in enumerate(self.pieces):
            hi = piece.upper(t)
            if s < hi or (p == last and s <= hi):
                return piece.rate(t, s)
        # s == t but the chain tops out below t; surface it as a domain error
        raise OutOfDomainError(
            f"no band covers s={s!r} at t={t!r} (chain ends at {self.pieces[-1].upper(t)!r})"
        )

    def validate(self, interval: tuple[float, float], checks: int = 64) -> list[Violation]:
        """Sample the chain over the interval and report every defect found.

        Checks, at each sampled t: the chain starts at 0, is ordered, ends
        at t, and the diagonal band does not vanish at s = t.  Violations
        are returned as data, not raised.
        """
        a, b = float(interval[0]), float(interval[1])
        if not (b > a):
            raise ValueError(f"interval: need a < b, got ({a}, {b})")
        if checks < 2:
            raise ValueError(f"checks: need at least 2 sample times, got {checks}")
        out: list[Violation] = []
        for k in range(1, checks + 1):
            t = a + (b - a) * k / checks
            scale = max(1.0, abs(t))
            lo0 = self.pieces[0].lower(t)
            if abs(lo0) > CHAIN_TOLERANCE * scale:
                out.append(Violation(t, "chain-start", f"first boundary is {lo0!r}, not 0"))
            prev = lo0
            for p, piece in enumerate(self.pieces):
                lo = piece.lower(t)
                # bands must tile [0, t]: each lower is the previous upper
                if p > 0 and abs(lo - prev) > CHAIN_TOLERANCE * scale:
                    out.append(
                        Violation(
                            t, "ordering", f"band {p} lower {lo!r} != previous upper {prev!r}"
                        )
                    )
                hi = piece.upper(t)
                if hi < prev - CHAIN_TOLERANCE * scale:
                    out.append(
                        Violation(t, "ordering", f"band {p} upper {hi!r} below lower {prev!r}")
                    )
                prev = hi
            if abs(prev - t) > CHAIN_TOLERANCE * scale:
                out.append(Violation(t, "chain-end", f"last boundary is {prev!r}, not t"))
            diag = self.pieces[-1].rate(t, t)
            if abs(diag) < 1e-13:
                out.append(Violation(t, "vanishing-diagonal", f"K(t, t) = {diag!r}"))
        return out


def piecewise_constant(values: Sequence[float], fractions: Sequence[float]) -> PiecewiseKernel:
    """Kernel with constant rates separated at fixed fractions of t."""
    vals = [float(v) for v in values]
    fracs = [float(f) for f in fractions]
    if len(fracs) != len(vals) - 1:
        raise BadFractionsError(
            f"{len(vals)} values need {len(vals) - 1} fractions, got {len(fracs)}"
        )
    if any(not (0.0 < f < 1.0) for f in fracs):
        raise BadFractionsError(f"fractions must lie strictly inside (0, 1): {fracs}")
    if any(f2 <= f1 for f1, f2 in zip(fracs, fracs[1:])):
        raise BadFractionsError(f"fractions must be strictly increasing: {fracs}")
    bounds = [0.0] + fracs + [1.0]
    pieces = []
    for v, lo, hi in zip(vals, bounds[:-1], bounds[1:]):
        pieces.append(
            KernelPiece(
                lower=BoundaryCurve.of_fraction(lo),
                upper=BoundaryCurve.of_fraction(hi),
                rate=(lambda t, s, v=v: v),
                constant=v,
            )
        )
    return PiecewiseKernel(tuple(pieces))


_PROBE_POINTS = 33
_START_TOLERANCE = 1e-10


@dataclass(frozen=True)
class VolterraProblem:
    """First-kind problem: integral of K(t, s) x(s) over [a, t] equals f(t).

    ``interval`` is the solving window [a, b].  When a = 0 this is the plain
    cumulative form; a > 0 arises when the history up to a has already been
    folded into the right side.  For a = 0 the data must satisfy f(0) = 0 or
    no solution exists; that is checked here against the sampled scale of f.
    """

    kernel: PiecewiseKernel
    rhs: Callable[[float], float]
    interval: tuple[float, float]

    def __post_init__(self) -> None:
        a, b = self.interval
        if not (b > a >= 0.0):
            raise ValueError(f"interval: need 0 <= a < b, got ({a!r}, {b!r})")
        if a == 0.0:
            scale = max(
                abs(float(self.rhs(a + (b - a) * k / (_PROBE_POINTS - 1))))
                for k in range(_PROBE_POINTS)
            )
            f0 = abs(float(self.rhs(0.0)))
            if f0 > _START_TOLERANCE * scale:
                raise ValueError(
                    f"rhs: f(0) = {f0:.3e} but a forward integral from 0 must vanish "
                    f"there (sampled max |f| = {scale:.3e})"
                )
