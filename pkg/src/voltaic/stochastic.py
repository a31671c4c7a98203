"""Self-validating floating-point scalars via random directed rounding.

A ``StochasticValue`` carries ``samples`` parallel copies of one computation.
Every arithmetic operation recomputes each copy and re-rounds the exact result
toward +inf or -inf at the last mantissa bit, the direction drawn from a
seedable stream.  After a chain of operations the spread of the copies
estimates the number of decimal digits of the mean that survived round-off:

    digits = log10( sqrt(l) * |mean| / (tau * sigma) )

with ``l`` copies, sample standard deviation ``sigma`` and ``tau`` the
two-sided Student-t critical value for ``l - 1`` degrees of freedom.  A result
whose estimate drops to zero digits (or whose mean is exactly zero) is an
*informatical zero*: a value indistinguishable from pure round-off noise.  It
prints as ``"@.0"``.

Two implementation notes, both load-bearing:

* Directed rounding is emulated exactly.  The error of every +, -, * is
  recovered with error-free transformations (two-sum, Dekker two-product) and
  the sign of the division error from the exact remainder, so an operation
  whose result is representable is not perturbed at all.  ``x - x`` stays
  exactly zero, and ``2 * 3`` keeps its full precision.
* The first two copies are antithetic: per operation one coin is drawn, copy 0
  rounds in that direction and copy 1 in the opposite one.  Copies beyond the
  pair use independent streams.  The pairing guarantees that a cascade of
  inexact operations drives the copies apart, which keeps the zero detector
  from being fooled when all independent copies would land on the same
  representable neighbour (with 3 copies that is a few-percent event per
  expression, far too frequent for a reliable detector).

Comparisons (<, <=, ...) act on sample means, which is what pivot selection
and convergence bookkeeping want.  ``abs`` and unary ``-`` are exact
samplewise maps.
"""

from __future__ import annotations

import json
import math
import random
from contextlib import contextmanager
from dataclasses import dataclass, field
from decimal import ROUND_DOWN, Decimal
from typing import Iterator, Sequence, Union

import numpy as np

__all__ = [
    "DsaConfig",
    "NcsdReport",
    "InstabilityEvent",
    "StochasticContext",
    "StochasticValue",
    "StochasticError",
    "StochasticOverflow",
    "DivisionByStochasticZero",
    "perturb",
    "ncsd_pair",
    "ncsd_report",
    "cestac_digits",
    "significant_string",
]

#: mantissa bits of IEEE-754 binary64; the only precision supported here
MANTISSA_BITS = 53

#: two-sided 95% Student-t critical value for 2 degrees of freedom,
#: matching the default of 3 samples
DEFAULT_TAU = 4.303


class StochasticError(ArithmeticError):
    """Base class for failures of the self-validating arithmetic."""


class StochasticOverflow(StochasticError):
    """An operation produced a non-finite sample."""


class DivisionByStochasticZero(StochasticError):
    """The divisor is an informatical zero: the quotient would be noise."""


@dataclass(frozen=True)
class DsaConfig:
    """Settings for discrete stochastic arithmetic runs.

    samples : number of parallel copies per value (>= 2)
    tau     : Student-t critical value used by the digit estimator; the
              default pairs with samples=3 (2 dof, 95% two-sided)
    seed    : root seed for the rounding-direction streams
    """

    samples: int = 3
    tau: float = DEFAULT_TAU
    seed: int = 0

    def __post_init__(self) -> None:
        if self.samples < 2:
            raise ValueError(f"samples: need at least 2, got {self.samples}")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ValueError(f"tau: must be a positive finite float, got {self.tau}")

    @classmethod
    def for_confidence(cls, samples: int, risk: float = 0.05, seed: int = 0) -> "DsaConfig":
        """Config whose tau is the two-sided Student-t value for the given risk."""
        from scipy import stats

        if samples < 2:
            raise ValueError(f"samples: need at least 2, got {samples}")
        tau = float(stats.t.ppf(1.0 - risk / 2.0, samples - 1))
        return cls(samples=samples, tau=tau, seed=seed)


@dataclass(frozen=True)
class NcsdReport:
    """Estimated significant decimal digits of a stochastic result.

    ``informatical_zero`` is True exactly when ``digits <= 0`` or the sample
    mean is zero: the value carries no reliable digit.
    """

    digits: float
    informatical_zero: bool


@dataclass(frozen=True)
class InstabilityEvent:
    """One numerical-instability record: what happened and where."""

    operation: str
    tag: str

    def as_json(self) -> str:
        return json.dumps({"operation": self.operation, "tag": self.tag})


# ---------------------------------------------------------------------------
# error-free transformations (exact round-off recovery in double precision)

_SPLIT = 134217729.0  # 2**27 + 1, Dekker's splitting constant


def _sum_error(a: float, b: float, s: float) -> float:
    # Knuth two-sum: a + b = s + error, exactly.
    bv = s - a
    av = s - bv
    return (a - av) + (b - bv)


def _product_error(a: float, b: float, p: float) -> float:
    # Dekker two-product: a * b = p + error, exactly (barring over/underflow,
    # where we conservatively report 0, i.e. treat the product as exact).
    ca = _SPLIT * a
    cb = _SPLIT * b
    if not (math.isfinite(ca) and math.isfinite(cb)):
        return 0.0
    ahi = ca - (ca - a)
    alo = a - ahi
    bhi = cb - (cb - b)
    blo = b - bhi
    return ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo


def _quotient_error_sign(a: float, b: float, q: float) -> int:
    # sign of the true quotient a/b minus the rounded q, from the exact
    # remainder a - q*b (the leading subtraction is exact by Sterbenz).
    p = q * b
    e = _product_error(q, b, p)
    r = (a - p) - e
    if r == 0.0:
        return 0
    above = (r > 0.0) == (b > 0.0)
    return 1 if above else -1


def _round_directed(nearest: float, err_sign: int, up: bool) -> float:
    # Given fl(x) and the sign of (x - fl(x)), return the directed rounding
    # of the exact x toward +inf (up) or -inf.
    if err_sign == 0:
        return nearest
    if up:
        return math.nextafter(nearest, math.inf) if err_sign > 0 else nearest
    return math.nextafter(nearest, -math.inf) if err_sign < 0 else nearest


# ---------------------------------------------------------------------------


def perturb(g: float, rng: random.Random) -> float:
    """Re-round ``g`` by one unit in the last place, direction by coin flip.

    Models a value whose trailing bits are unknown.  Unbiased; zero is a
    fixed point; |perturb(g) - g| equals ulp(g) exactly.
    """
    if not math.isfinite(g):
        raise ValueError(f"perturb: non-finite input {g!r}")
    if g == 0.0:
        return 0.0
    u = math.ulp(g)
    return g + u if rng.getrandbits(1) else g - u


def ncsd_pair(z1: float, z2: float) -> float:
    """Number of decimal significant digits common to two plain floats.

    Equal arguments share all their digits (+inf).  Values symmetric about
    zero share none (-inf).
    """
    if z1 == z2:
        return math.inf
    num = z1 + z2
    if num == 0.0:
        return -math.inf
    return math.log10(abs(num / (2.0 * (z1 - z2))))


def _mean(samples: Sequence[float]) -> float:
    return math.fsum(samples) / len(samples)


def _spread(samples: Sequence[float], mean: float) -> float:
    dev = math.fsum((s - mean) ** 2 for s in samples)
    return math.sqrt(dev / (len(samples) - 1))


def ncsd_report(samples: Sequence[float], cfg: DsaConfig) -> NcsdReport:
    """Digit estimate for raw samples (the core of the zero detector)."""
    if len(samples) < 2:
        raise ValueError("ncsd_report: need at least 2 samples")
    mean = _mean(samples)
    if mean == 0.0:
        return NcsdReport(-math.inf, True)
    sigma = _spread(samples, mean)
    if sigma == 0.0:
        return NcsdReport(math.inf, False)
    digits = math.log10(math.sqrt(len(samples)) * abs(mean) / (cfg.tau * sigma))
    return NcsdReport(digits, digits <= 0.0)


def _is_noise(samples: Sequence[float], tau: float) -> bool:
    # informatical-zero test without the log10 (hot path)
    mean = _mean(samples)
    if mean == 0.0:
        return True
    l = len(samples)
    dev = math.fsum((s - mean) ** 2 for s in samples)
    sigma2 = dev / (l - 1)
    return l * mean * mean <= tau * tau * sigma2


def cestac_digits(value: "StochasticValue", cfg: DsaConfig | None = None) -> NcsdReport:
    """Digit estimate for a stochastic value (config defaults to its context's)."""
    cfg = cfg or value.ctx.cfg
    return ncsd_report(value.samples, cfg)


def significant_string(value: "StochasticValue", cfg: DsaConfig | None = None) -> str:
    """Render only the significant digits of the mean, in 0.dddE+eee form.

    Informatical zeros render as "@.0".  A value with no detectable spread
    renders at full precision.  The mantissa is truncated, not rounded: digits
    past the significant ones are unreliable by construction, so nothing is
    gained by letting them influence the last kept digit.
    """
    cfg = cfg or value.ctx.cfg
    rep = ncsd_report(value.samples, cfg)
    if rep.informatical_zero:
        return "@.0"
    mean = value.mean
    if math.isinf(rep.digits):
        return repr(mean)
    kept = max(1, min(17, int(round(rep.digits))))
    return _format_truncated(mean, kept)


def _format_truncated(x: float, kept: int) -> str:
    sign = "-" if x < 0 else ""
    dec = Decimal(abs(x))  # exact binary-to-decimal expansion
    e10 = dec.adjusted() + 1  # x = m * 10**e10 with m in [0.1, 1)
    mantissa = dec.scaleb(-e10)
    q = mantissa.quantize(Decimal(1).scaleb(-kept), rounding=ROUND_DOWN)
    digits = format(q, "f")[2:]  # strip the leading "0."
    return f"{sign}0.{digits}E{e10:+04d}"


# ---------------------------------------------------------------------------


class StochasticContext:
    """Owns the rounding-direction streams and the instability log.

    All values taking part in one computation must share a context.  Streams
    are split from the config seed with one child per independent consumer
    (the antithetic pair plus each extra copy), so runs are reproducible and
    the copy count can change without re-seeding logic.
    """

    def __init__(self, cfg: DsaConfig | None = None):
        self.cfg = cfg or DsaConfig()
        root = np.random.SeedSequence(self.cfg.seed)
        children = root.spawn(1 + max(0, self.cfg.samples - 2))
        self._pair_stream = random.Random(children[0].generate_state(4).tobytes())
        self._extra_streams = [
            random.Random(c.generate_state(4).tobytes()) for c in children[1:]
        ]
        self.instabilities: list[InstabilityEvent] = []
        self._tag = "untagged"

    # -- bookkeeping --------------------------------------------------------

    @contextmanager
    def region(self, tag: str) -> Iterator[None]:
        """Label instability records raised while the block runs."""
        prev = self._tag
        self._tag = tag
        try:
            yield
        finally:
            self._tag = prev

    def _log(self, operation: str) -> None:
        self.instabilities.append(InstabilityEvent(operation, self._tag))

    def instabilities_jsonl(self) -> str:
        return "\n".join(ev.as_json() for ev in self.instabilities)

    # -- value construction --------------------------------------------------

    def exact(self, x: Union[int, float]) -> "StochasticValue":
        """Broadcast a known-exact float to all copies, unperturbed."""
        v = float(x)
        if not math.isfinite(v):
            raise ValueError(f"exact: non-finite input {x!r}")
        return StochasticValue((v,) * self.cfg.samples, self)

    def value(self, samples: Sequence[float]) -> "StochasticValue":
        """Wrap explicit per-copy samples (mostly for tests and diagnostics)."""
        tup = tuple(float(s) for s in samples)
        if len(tup) < 2:
            raise ValueError("value: need at least 2 samples")
        if not all(math.isfinite(s) for s in tup):
            raise ValueError("value: samples must be finite")
        return StochasticValue(tup, self)

    # -- the sampled operation ------------------------------------------------

    def _coins(self, n: int) -> list[bool]:
        up = self._pair_stream.getrandbits(1) == 1
        coins = [up, not up]
        for stream in self._extra_streams:
            coins.append(stream.getrandbits(1) == 1)
        return coins[:n]

    def _binary(self, op: str, a: "StochasticValue", b: "StochasticValue") -> "StochasticValue":
        tau = self.cfg.tau
        if op == "/" and _is_noise(b.samples, tau):
            self._log("division-by-informatical-zero")
            raise DivisionByStochasticZero(
                f"divisor is an informatical zero (samples {b.samples})"
            )
        coins = self._coins(len(a.samples))
        out = []
        for x, y, up in zip(a.samples, b.samples, coins):
            if op == "+":
                nearest = x + y
                if not math.isfinite(nearest):
                    raise StochasticOverflow(f"{x!r} + {y!r} overflowed")
                err = _sum_error(x, y, nearest)
                sign = 0 if err == 0.0 else (1 if err > 0.0 else -1)
            elif op == "-":
                nearest = x - y
                if not math.isfinite(nearest):
                    raise StochasticOverflow(f"{x!r} - {y!r} overflowed")
                err = _sum_error(x, -y, nearest)
                sign = 0 if err == 0.0 else (1 if err > 0.0 else -1)
            elif op == "*":
                nearest = x * y
                if not math.isfinite(nearest):
                    raise StochasticOverflow(f"{x!r} * {y!r} overflowed")
                err = _product_error(x, y, nearest)
                sign = 0 if err == 0.0 else (1 if err > 0.0 else -1)
            else:  # "/"
                nearest = x / y
                if not math.isfinite(nearest):
                    raise StochasticOverflow(f"{x!r} / {y!r} overflowed")
                sign = _quotient_error_sign(x, y, nearest)
            out.append(_round_directed(nearest, sign, up))
        result = StochasticValue(tuple(out), self)
        if op in ("+", "-") and _is_noise(out, tau):
            if not (_is_noise(a.samples, tau) or _is_noise(b.samples, tau)):
                self._log("cancellation")
        return result


@dataclass(frozen=True)
class StochasticValue:
    """Immutable bundle of parallel samples tied to a context.

    Supports +, -, *, / against other stochastic values or plain numbers
    (plain operands are lifted exactly).  float() and comparisons use the
    sample mean.
    """

    samples: tuple[float, ...]
    ctx: StochasticContext = field(repr=False, compare=False)

    # -- views ---------------------------------------------------------------

    @property
    def mean(self) -> float:
        return _mean(self.samples)

    def __float__(self) -> float:
        return self.mean

    def report(self) -> NcsdReport:
        return ncsd_report(self.samples, self.ctx.cfg)

    def is_zero(self) -> bool:
        return _is_noise(self.samples, self.ctx.cfg.tau)

    def __str__(self) -> str:
        return significant_string(self)

    # -- arithmetic ------------------------------------------------------------

    def _lift(self, other) -> "StochasticValue | None":
        if isinstance(other, StochasticValue):
            if other.ctx is not self.ctx:
                raise ValueError("operands belong to different stochastic contexts")
            return other
        if isinstance(other, (int, float)):
            return self.ctx.exact(other)
        return None

    def __add__(self, other):
        o = self._lift(other)
        return NotImplemented if o is None else self.ctx._binary("+", self, o)

    def __radd__(self, other):
        o = self._lift(other)
        return NotImplemented if o is None else self.ctx._binary("+", o, self)

    def __sub__(self, other):
        o = self._lift(other)
        return NotImplemented if o is None else self.ctx._binary("-", self, o)

    def __rsub__(self, other):
        o = self._lift(other)
        return NotImplemented if o is None else self.ctx._binary("-", o, self)

    def __mul__(self, other):
        o = self._lift(other)
        return NotImplemented if o is None else self.ctx._binary("*", self, o)

    def __rmul__(self, other):
        o = self._lift(other)
        return NotImplemented if o is None else self.ctx._binary("*", o, self)

    def __truediv__(self, other):
        o = self._lift(other)
        return NotImplemented if o is None else self.ctx._binary("/", self, o)

    def __rtruediv__(self, other):
        o = self._lift(other)
        return NotImplemented if o is None else self.ctx._binary("/", o, self)

    def __neg__(self):
        return StochasticValue(tuple(-s for s in self.samples), self.ctx)

    def __pos__(self):
        return self

    def __abs__(self):
        return StochasticValue(tuple(abs(s) for s in self.samples), self.ctx)

    # -- comparisons on means ---------------------------------------------------

    def _other_mean(self, other) -> float:
        if isinstance(other, StochasticValue):
            return other.mean
        return float(other)

    def __lt__(self, other):
        return self.mean < self._other_mean(other)

    def __le__(self, other):
        return self.mean <= self._other_mean(other)

    def __gt__(self, other):
        return self.mean > self._other_mean(other)

    def __ge__(self, other):
        return self.mean >= self._other_mean(other)
