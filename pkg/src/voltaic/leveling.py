"""Battery load leveling on top of the Volterra solver.

Pipeline: a half-hourly load series is fitted by local degree-4 polynomials
(10 points per window, disjoint windows, last window right-aligned), the
right-hand side is the cumulative deviation from a target level,

    f(t) = integral from 0 to t of (target - model),

and the first-kind equation with the storage-efficiency kernel is solved
for the charge/discharge power x (ACPF, positive = charging).  The state
of charge is the running trapezoidal integral of the ACPF on the series
grid; efficiency losses live in the kernel and are not re-applied.

The window fits are independent, so the model (and hence f') jumps at the
window-ownership boundaries, and with a fraction kernel each jump at b
induces kinks of x at b/q for every band fraction q.  The solver therefore
marches across the closure of those breakpoints: on each closed segment
the true solution is one smooth piece, the history integral over earlier
segments moves to the right-hand side, and a single Taylor solve handles
the rest.  ``march_solve`` exposes the marching solver directly for
problems that come with their own f.

A midpoint product-integration solver (``brute_force_oracle``) provides an
independent low-order answer for cross-checking; it shares nothing with
the collocation path beyond the kernel.
"""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as npoly
from scipy.integrate import cumulative_trapezoid

from .accuracy import OptimalResult, optimal_solve
from .collocation import CollocationConfig, TaylorSolution, solve
from .kernels import PiecewiseKernel, VolterraProblem
from .quadrature import gauss_legendre
from .stochastic import DsaConfig

__all__ = [
    "ParseError",
    "NonMonotonicTime",
    "RankDeficientFit",
    "ZeroDiagonalError",
    "LoadSeries",
    "load_csv",
    "LoadModel",
    "fit_windows",
    "LeveledRhs",
    "build_rhs",
    "solve_segments",
    "PiecewiseSolution",
    "march_solve",
    "apply_operator",
    "StrategyResult",
    "compute_strategy",
    "strategy_residual",
    "OracleSolution",
    "brute_force_oracle",
    "fixture_path",
]

FIT_DEGREE = 4
FIT_WINDOW = 10


class ParseError(ValueError):
    """Malformed input CSV; message carries the 1-based line number."""


class NonMonotonicTime(ValueError):
    """Time column must be strictly increasing."""


class RankDeficientFit(ArithmeticError):
    """A fitting window produced a rank-deficient least-squares system."""


class ZeroDiagonalError(ArithmeticError):
    """Product integration needs K(t,t) != 0 on the diagonal."""


@dataclass(frozen=True, eq=False)
class LoadSeries:
    """Sampled load: times in hours from horizon start, values in MW."""

    times: np.ndarray
    values: np.ndarray
    label: str = "actual"

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        if t.ndim != 1 or v.shape != t.shape:
            raise ValueError(f"times/values: need matching 1-d arrays, got {t.shape} and {v.shape}")
        if t.size and np.any(np.diff(t) <= 0.0):
            i = int(np.argmax(np.diff(t) <= 0.0))
            raise NonMonotonicTime(
                f"times must be strictly increasing; times[{i}]={t[i]!r} >= times[{i + 1}]={t[i + 1]!r}"
            )
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(v)):
            raise ValueError("times/values: all entries must be finite")
        if t.size < FIT_WINDOW:
            raise ValueError(f"need at least {FIT_WINDOW} points (one fitting window), got {t.size}")

    def __len__(self) -> int:
        return int(self.times.size)


def load_csv(path: str | Path) -> LoadSeries:
    """Read a `time_hours,load_mw` CSV (header optional)."""
    path = Path(path)
    times: list[float] = []
    values: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ParseError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                t, v = float(row[0]), float(row[1])
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise ParseError(f"{path}:{lineno}: non-numeric row {row!r}") from None
            times.append(t)
            values.append(v)
    if not times:
        raise ParseError(f"{path}: no data rows")
    return LoadSeries(np.array(times), np.array(values), label=path.stem)


@dataclass(frozen=True, eq=False)
class LoadModel:
    """Piecewise polynomial load model from independent window fits.

    ``bounds`` are the ownership boundaries (window start times plus the
    horizon end); window w is used on [bounds[w], bounds[w+1]), boundaries
    going to the window on the right, and the outermost windows extrapolate
    beyond the horizon.  ``coefs`` holds plain power-basis coefficients.
    """

    coefs: tuple[tuple[float, ...], ...]
    bounds: tuple[float, ...]

    def window_index(self, t: float) -> int:
        return int(np.searchsorted(np.asarray(self.bounds[1:-1]), t, side="right"))

    def __call__(self, t):
        ts = np.asarray(t, dtype=float)
        idx = np.searchsorted(np.asarray(self.bounds[1:-1]), ts, side="right")
        out = np.empty_like(ts)
        for w in np.unique(idx):
            mask = idx == w
            out[mask] = npoly.polyval(ts[mask], self.coefs[w])
        return float(out) if np.isscalar(t) else out

    def average(self, lo: float = 0.0, hi: float | None = None) -> float:
        """Exact mean of the model over [lo, hi] (default: 0 to horizon end)."""
        hi = self.bounds[-1] if hi is None else hi
        edges = [lo] + [b for b in self.bounds[1:-1] if lo < b < hi] + [hi]
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            anti = npoly.polyint(self.coefs[self.window_index(a)])
            total += npoly.polyval(b, anti) - npoly.polyval(a, anti)
        return total / (hi - lo)


def fit_windows(series: LoadSeries, degree: int = FIT_DEGREE, window: int = FIT_WINDOW) -> LoadModel:
    """Independent least-squares polynomial per consecutive point window."""
    n = len(series)
    if window < degree + 1:
        raise ValueError(f"window: need >= degree+1 points, got {window} for degree {degree}")
    if n < window:
        raise ValueError(f"series: need >= {window} points, got {n}")
    starts = list(range(0, n - window + 1, window))
    if starts[-1] != n - window:
        starts.append(n - window)  # right-align the tail window

    coefs = []
    for w, s in enumerate(starts):
        xs = series.times[s : s + window]
        ys = series.values[s : s + window]
        fitted, (_, rank, _, _) = Polynomial.fit(xs, ys, degree, full=True)
        if rank < degree + 1:
            raise RankDeficientFit(
                f"window {w} (t in [{xs[0]}, {xs[-1]}]): rank {rank} < {degree + 1}"
            )
        coefs.append(tuple(fitted.convert().coef.tolist()))
    bounds = tuple(float(series.times[s]) for s in starts) + (float(series.times[-1]),)
    return LoadModel(coefs=tuple(coefs), bounds=bounds)


@dataclass(frozen=True, eq=False)
class LeveledRhs:
    """f(t) = integral from 0 to t of (target - model); f(0) = 0 exactly.

    Antiderivatives of the window polynomials are carried explicitly, with
    cumulative offsets at the ownership boundaries, so evaluation is exact
    (no running quadrature) and vectorizes.
    """

    model: LoadModel
    target: float
    _starts: tuple[float, ...] = field(init=False)
    _offsets: tuple[float, ...] = field(init=False)
    _antis: tuple[tuple[float, ...], ...] = field(init=False)

    def __post_init__(self) -> None:
        starts = (0.0,) + tuple(self.model.bounds[1:-1])
        antis = tuple(tuple(npoly.polyint(c).tolist()) for c in self.model.coefs)
        offsets = [0.0]
        for w in range(len(starts) - 1):
            a, b = starts[w], starts[w + 1]
            moved = npoly.polyval(b, antis[w]) - npoly.polyval(a, antis[w])
            offsets.append(offsets[-1] + self.target * (b - a) - moved)
        object.__setattr__(self, "_starts", starts)
        object.__setattr__(self, "_offsets", tuple(offsets))
        object.__setattr__(self, "_antis", antis)

    def __call__(self, t):
        ts = np.asarray(t, dtype=float)
        idx = np.searchsorted(np.asarray(self._starts[1:]), ts, side="right")
        out = np.empty_like(ts)
        for w in np.unique(idx):
            mask = idx == w
            a = self._starts[w]
            anti = self._antis[w]
            moved = npoly.polyval(ts[mask], anti) - npoly.polyval(a, anti)
            out[mask] = self._offsets[w] + self.target * (ts[mask] - a) - moved
        return float(out) if np.isscalar(t) else out

    def deviation(self, t):
        """target - model(t): the load surplus the storage must absorb."""
        return self.target - self.model(t)


def build_rhs(model: LoadModel, target: float | None = None) -> LeveledRhs:
    """Right-hand side from a load model; default target is the model mean."""
    if target is None:
        target = model.average()
    if not math.isfinite(target):
        raise ValueError(f"target: must be finite, got {target!r}")
    return LeveledRhs(model=model, target=float(target))


def solve_segments(
    seeds, fractions, end: float, *, rel_tol: float = 1e-12
) -> tuple[float, ...]:
    """Breakpoints for marching: seed kinks closed under band preimages.

    A kink of the data at b makes the solution kink at b, and through a
    kernel band boundary at fraction q also at b/q; the closure of the seed
    set under b -> b/q (for every interior fraction) up to the horizon end
    is the coarsest partition on which the solution is piecewise-smooth.
    """
    if not end > 0.0:
        raise ValueError(f"end: must be positive, got {end!r}")
    fr = [float(q) for q in fractions if 0.0 < float(q) < 1.0]
    tol = rel_tol * end
    found: list[float] = []

    def push(b: float) -> bool:
        if not tol < b < end - tol:
            return False
        i = bisect.bisect_left(found, b)
        for j in (i - 1, i):
            if 0 <= j < len(found) and abs(found[j] - b) <= tol:
                return False
        found.insert(i, b)
        return True

    queue = [float(b) for b in seeds]
    while queue:
        b = queue.pop()
        if push(b):
            queue.extend(b / q for q in fr)
    return (0.0,) + tuple(found) + (float(end),)


@dataclass(frozen=True, eq=False)
class PiecewiseSolution:
    """One Taylor polynomial per marching segment; breakpoints go right."""

    bounds: tuple[float, ...]
    pieces: tuple[TaylorSolution, ...]

    def __post_init__(self) -> None:
        if len(self.pieces) != len(self.bounds) - 1:
            raise ValueError(
                f"pieces: expected {len(self.bounds) - 1} segments, got {len(self.pieces)}"
            )

    def segment_index(self, t: float) -> int:
        return int(np.searchsorted(np.asarray(self.bounds[1:-1]), t, side="right"))

    def __call__(self, t):
        ts = np.asarray(t, dtype=float)
        idx = np.searchsorted(np.asarray(self.bounds[1:-1]), ts, side="right")
        out = np.empty_like(ts)
        for k in np.unique(idx):
            mask = idx == k
            piece = self.pieces[k]
            out[mask] = npoly.polyval(ts[mask] - piece.center, piece.coefficient_floats())
        return float(out) if np.isscalar(t) else out


def _chunked(lo: float, hi: float, cuts) -> list[tuple[float, float]]:
    """Split [lo, hi] at every interior cut (cuts sorted ascending)."""
    edges = [lo] + [c for c in cuts if lo < c < hi] + [hi]
    return [(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def apply_operator(
    kernel: PiecewiseKernel,
    sol: PiecewiseSolution,
    t: float,
    *,
    cap: float | None = None,
    order: int = 16,
) -> float:
    """Integral of K(t, s) x(s) over [0, min(cap, t)] for a piecewise x.

    Integration is split at both the kernel band boundaries and the
    solution segment bounds, so Gauss quadrature sees a single polynomial
    times a smooth rate on each chunk.
    """
    upper = float(t) if cap is None else min(float(cap), float(t))
    rule = gauss_legendre(order)
    nodes = np.asarray(rule.nodes)
    weights = np.asarray(rule.weights)
    total = 0.0
    for piece in kernel.pieces:
        lo = max(float(piece.lower(t)), 0.0)
        hi = min(float(piece.upper(t)), upper)
        if not hi > lo:
            continue
        for a, b in _chunked(lo, hi, sol.bounds[1:-1]):
            mid = 0.5 * (a + b)
            half = 0.5 * (b - a)
            ss = mid + half * nodes
            seg = sol.pieces[sol.segment_index(0.5 * (a + b))]
            xs = npoly.polyval(ss - seg.center, seg.coefficient_floats())
            if piece.constant is not None:
                rates = piece.constant
            else:
                rates = np.array([piece.rate(float(t), float(s)) for s in ss])
            total += half * float(np.sum(weights * rates * xs))
    return total


def march_solve(
    kernel: PiecewiseKernel,
    rhs,
    bounds,
    degree: int,
    *,
    quadrature_order: int | None = None,
) -> PiecewiseSolution:
    """Solve the first-kind equation segment by segment from t = 0.

    On segment [a, b] the operator restricted to s >= a is assembled as
    usual and the contribution of the already-solved history [0, a] is
    subtracted from f.  Segment breakpoints must include every kink of the
    data (see solve_segments); then each segment's solution is one smooth
    piece and the Taylor ansatz applies.
    """
    bounds = tuple(float(b) for b in bounds)
    if len(bounds) < 2 or any(b <= a for a, b in zip(bounds, bounds[1:])):
        raise ValueError(f"bounds: need a strictly increasing partition, got {bounds!r}")
    if bounds[0] != 0.0:
        raise ValueError(f"bounds: marching starts at 0, got {bounds[0]!r}")

    pieces: list[TaylorSolution] = []
    order = quadrature_order if quadrature_order is not None else max(16, degree + 2)

    for a, b in zip(bounds, bounds[1:]):
        if a == 0.0:
            seg_rhs = rhs
        else:
            done = PiecewiseSolution(bounds=bounds[: len(pieces) + 1], pieces=tuple(pieces))

            def seg_rhs(t, _done=done, _a=a):
                return float(rhs(t)) - apply_operator(kernel, _done, t, cap=_a, order=order)

        problem = VolterraProblem(kernel=kernel, rhs=seg_rhs, interval=(a, b))
        cfg = CollocationConfig(
            degree=degree, interval=(a, b), quadrature_order=quadrature_order
        )
        pieces.append(solve(problem, cfg))
    return PiecewiseSolution(bounds=bounds, pieces=tuple(pieces))


@dataclass(frozen=True, eq=False)
class StrategyResult:
    """Charge/discharge strategy on the series grid.

    acpf is the storage power in MW (positive = charging); soc is its
    running trapezoidal integral in MWh, starting at 0.
    """

    times: np.ndarray
    acpf: np.ndarray
    soc: np.ndarray
    solution: PiecewiseSolution
    rhs: LeveledRhs
    target: float


def compute_strategy(
    series: LoadSeries,
    kernel: PiecewiseKernel,
    cfg: CollocationConfig,
    dsa: DsaConfig | None = None,
    *,
    target: float | None = None,
    probe_time: float | None = None,
    n_min: int = 2,
    n_max: int = 15,
) -> tuple[StrategyResult, OptimalResult | None]:
    """Full pipeline: fit, build f, choose degree, march, integrate SoC.

    Without a DSA config the Taylor degree is cfg.degree.  With one, the
    stochastic escalation runs on the first marching segment at a probe
    point (default: the 8th series ordinate, clamped into the segment) and
    the degree it certifies is used for the whole march.
    """
    model = fit_windows(series)
    rhs = build_rhs(model, target)
    end = float(series.times[-1])
    fractions = kernel.fractions
    if fractions is None:
        bounds = (0.0, end)  # no ray structure: single global solve
    else:
        bounds = solve_segments(model.bounds[1:-1], fractions, end)

    optimal: OptimalResult | None = None
    degree = cfg.degree
    if dsa is not None:
        first = VolterraProblem(kernel=kernel, rhs=rhs, interval=(0.0, bounds[1]))
        if probe_time is None:
            k = min(7, len(series) - 1)
            probe_time = float(series.times[k])
        probe = min(max(float(probe_time), bounds[1] * 1e-3), bounds[1])
        optimal = optimal_solve(first, probe, n_min=n_min, n_max=n_max, dsa=dsa)
        degree = optimal.optimal_degree

    solution = march_solve(
        kernel, rhs, bounds, degree, quadrature_order=cfg.quadrature_order
    )
    acpf = solution(series.times)
    soc = cumulative_trapezoid(acpf, series.times, initial=0.0)
    result = StrategyResult(
        times=series.times.copy(),
        acpf=acpf,
        soc=soc,
        solution=solution,
        rhs=rhs,
        target=rhs.target,
    )
    return result, optimal


def strategy_residual(
    kernel: PiecewiseKernel,
    rhs,
    solution: PiecewiseSolution,
    probes,
    *,
    order: int = 16,
) -> float:
    """Max defect of the original equation over the probe times."""
    worst = 0.0
    for t in probes:
        worst = max(worst, abs(apply_operator(kernel, solution, float(t), order=order) - float(rhs(t))))
    return worst


@dataclass(frozen=True, eq=False)
class OracleSolution:
    """Gridded reference solution at cell midpoints."""

    times: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        return np.interp(np.asarray(t, dtype=float), self.times, self.values)


def brute_force_oracle(problem: VolterraProblem, steps: int) -> OracleSolution:
    """Midpoint product integration: an independent low-order solver.

    Uniform cells on [0, T]; the unknown is taken constant per cell, the
    kernel is integrated exactly over each band/cell overlap, and the
    lower-triangular system is solved by forward substitution.  Converges
    at O(h^2) on smooth problems.  Ray kernels (every boundary a fixed
    fraction of t) use a running-prefix formulation that is O(steps);
    general kernels fall back to O(steps^2) with midpoint-sampled rates.
    """
    a, b = problem.interval
    if a != 0.0:
        raise ValueError(f"oracle integrates from 0, got interval start {a!r}")
    if steps < 100:
        raise ValueError(f"steps: need >= 100, got {steps}")
    h = (b - a) / steps
    mids = (np.arange(steps) + 0.5) * h
    rows = (np.arange(steps) + 1.0) * h
    try:
        fs = np.asarray(problem.rhs(rows), dtype=float)
        if fs.shape != rows.shape:
            raise TypeError
    except TypeError:
        fs = np.array([float(problem.rhs(float(t))) for t in rows])

    fractions = problem.kernel.fractions
    consts = [p.constant for p in problem.kernel.pieces]
    if fractions is not None and all(c is not None for c in consts):
        values = _oracle_ray(fractions, consts, fs, h, steps)
    else:
        values = _oracle_generic(problem.kernel, fs, h, steps)
    return OracleSolution(times=mids, values=values)


def _oracle_ray(fractions, consts, fs, h: float, n: int) -> np.ndarray:
    """O(n) forward substitution using exact prefix integrals of the cells."""
    lows = (0.0,) + tuple(fractions)
    highs = tuple(fractions) + (1.0,)
    x = np.empty(n)
    prefix = [0.0]  # prefix[m] = h * sum(x[:m])
    vmax = max(abs(v) for v in consts)

    def cum(tau: float, solved: int) -> float:
        # integral of the step reconstruction over [0, tau]; tau never
        # reaches past the solved cells except by float jitter
        if tau <= 0.0:
            return 0.0
        m = int(tau / h)
        if m >= solved:
            return prefix[solved]
        return prefix[m] + (tau - m * h) * x[m]

    for i in range(n):
        t = (i + 1) * h
        cell_lo = i * h
        known = 0.0
        diag = 0.0
        for v, ql, qh in zip(consts, lows, highs):
            lo, hi = ql * t, qh * t
            known += v * (cum(min(hi, cell_lo), i) - cum(min(lo, cell_lo), i))
            diag += v * max(0.0, min(hi, t) - max(lo, cell_lo))
        if abs(diag) < 1e-14 * h * max(vmax, 1.0):
            raise ZeroDiagonalError(f"diagonal weight {diag!r} at t={t!r}")
        xi = (fs[i] - known) / diag
        x[i] = xi
        prefix.append(prefix[-1] + h * xi)
    return x


def _oracle_generic(kernel: PiecewiseKernel, fs, h: float, n: int) -> np.ndarray:
    """O(n^2) row-by-row weights for kernels without the ray structure."""
    edges = np.arange(n + 1) * h
    mids = (np.arange(n) + 0.5) * h
    x = np.empty(n)
    for i in range(n):
        t = (i + 1) * h
        m = i + 1  # cells 0..i reach up to t exactly
        w = np.zeros(m)
        for piece in kernel.pieces:
            lo = max(float(piece.lower(t)), 0.0)
            hi = min(float(piece.upper(t)), t)
            if not hi > lo:
                continue
            overlap = np.minimum(hi, edges[1 : m + 1]) - np.maximum(lo, edges[:m])
            np.clip(overlap, 0.0, None, out=overlap)
            live = overlap > 0.0
            if not np.any(live):
                continue
            rates = np.array([piece.rate(t, float(s)) for s in mids[:m][live]])
            w[live] += rates * overlap[live]
        if abs(w[i]) < 1e-14 * max(h, float(np.max(np.abs(w)))):
            raise ZeroDiagonalError(f"diagonal weight {w[i]!r} at t={t!r}")
        x[i] = (fs[i] - float(w[:i] @ x[:i])) / w[i]
    return x


def fixture_path(name: str = "synthetic_ireland_24h.csv") -> Path:
    """Path to a bundled data fixture."""
    return Path(str(resources.files("voltaic").joinpath("fixtures", name)))
