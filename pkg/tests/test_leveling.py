"""Load-leveling pipeline: ingestion, fitting, marching solve, oracle."""

import math

import numpy as np
import pytest
from scipy.integrate import cumulative_trapezoid, quad

from conftest import DEMO_FRACTIONS, DEMO_VALUES, RATE_SUM, forward_rhs

from voltaic import (
    CollocationConfig,
    DsaConfig,
    LoadSeries,
    NonMonotonicTime,
    ParseError,
    VolterraProblem,
    ZeroDiagonalError,
    apply_operator,
    brute_force_oracle,
    build_rhs,
    compute_strategy,
    fit_windows,
    fixture_path,
    load_csv,
    march_solve,
    piecewise_constant,
    solve_segments,
    strategy_residual,
)

FIXTURE_NOISE_SIGMA = 25.0


@pytest.fixture(scope="module")
def fixture_series():
    return load_csv(fixture_path())


@pytest.fixture(scope="module")
def fixture_model(fixture_series):
    return fit_windows(fixture_series)


# -------------------------------------------------------------- ingestion

def test_fixture_loads(fixture_series):
    assert len(fixture_series.times) == 48
    assert fixture_series.times[0] == 0.0
    assert fixture_series.times[-1] == 23.5
    assert fixture_series.label == "synthetic_ireland_24h"
    assert np.all(np.isfinite(fixture_series.values))


def test_monotonicity_checked_before_length():
    # three points is both too short and non-monotonic: time order wins
    with pytest.raises(NonMonotonicTime):
        LoadSeries(np.array([0.0, 1.0, 1.0]), np.array([1.0, 2.0, 3.0]))


def test_series_needs_ten_points():
    with pytest.raises(ValueError, match="10"):
        LoadSeries(np.arange(5.0), np.ones(5))


def test_load_csv_empty_file(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    with pytest.raises(ParseError):
        load_csv(p)


def test_load_csv_bad_row_names_line(tmp_path):
    p = tmp_path / "bad.csv"
    rows = ["time_hours,load_mw"] + [f"{i * 0.5},{1000 + i}" for i in range(11)]
    rows[7] = "3.0,not-a-number"  # file line 8 (header is line 1)
    p.write_text("\n".join(rows) + "\n")
    with pytest.raises(ParseError, match=":8"):
        load_csv(p)


def test_load_csv_wrong_column_count(tmp_path):
    p = tmp_path / "cols.csv"
    p.write_text("\n".join(f"{i * 0.5},1,2" for i in range(12)) + "\n")
    with pytest.raises(ParseError):
        load_csv(p)


def test_load_csv_headerless(tmp_path):
    p = tmp_path / "plain.csv"
    p.write_text("\n".join(f"{i * 0.5},{3000.0 + i}" for i in range(12)) + "\n")
    series = load_csv(p)
    assert len(series.times) == 12
    assert series.values[3] == 3003.0


# ---------------------------------------------------------------- fitting

def test_fit_reproduces_exact_quartic():
    times = np.linspace(0.0, 23.5, 48)
    poly = lambda t: 1.0 + 2.0 * t - 0.3 * t**2 + 0.01 * t**3 - 1e-4 * t**4
    series = LoadSeries(times, poly(times))
    model = fit_windows(series)
    assert np.max(np.abs(model(times) - poly(times))) < 1e-8 * np.max(np.abs(poly(times)))


def test_fit_constant_series():
    times = np.linspace(0.0, 23.5, 48)
    model = fit_windows(LoadSeries(times, np.full(48, 3000.0)))
    probe = np.linspace(0.0, 23.5, 200)
    assert np.max(np.abs(model(probe) - 3000.0)) < 1e-9 * 3000.0


def test_fit_residual_within_noise(fixture_series, fixture_model):
    resid = np.abs(fixture_model(fixture_series.times) - fixture_series.values)
    assert float(resid.max()) < 3.0 * FIXTURE_NOISE_SIGMA


def test_fit_window_bounds(fixture_model):
    # 48 points in 10-point windows, last right-aligned: 5 windows
    assert len(fixture_model.coefs) == 5
    assert fixture_model.bounds[0] == 0.0
    assert fixture_model.bounds[-1] == 23.5


def test_breakpoints_belong_to_right_window(fixture_model):
    b = fixture_model.bounds[1]
    assert fixture_model.window_index(b) == 1
    assert fixture_model.window_index(b - 1e-9) == 0


def _quad_piecewise(f, bounds, hi):
    # integrate window by window: the model jumps at interior bounds
    total = 0.0
    for lo_b, hi_b in zip(bounds[:-1], bounds[1:]):
        top = min(hi_b, hi)
        if top > lo_b:
            total += quad(f, lo_b, top, limit=100)[0]
        if top >= hi:
            break
    return total


def test_model_average_matches_quadrature(fixture_model):
    lo, hi = fixture_model.bounds[0], fixture_model.bounds[-1]
    numeric = _quad_piecewise(
        lambda t: float(fixture_model(t)), fixture_model.bounds, hi
    ) / (hi - lo)
    assert fixture_model.average() == pytest.approx(numeric, rel=1e-9)


# ------------------------------------------------------------------- rhs

def test_rhs_starts_at_zero(fixture_model):
    rhs = build_rhs(fixture_model)
    assert rhs(0.0) == 0.0


def test_rhs_matches_quadrature(fixture_model):
    target = 3100.0
    rhs = build_rhs(fixture_model, target)
    for t in (0.7, 5.0, 11.3, 19.0, 23.5):
        numeric = _quad_piecewise(
            lambda u: target - float(fixture_model(u)), fixture_model.bounds, t
        )
        assert rhs(t) == pytest.approx(numeric, abs=1e-6, rel=1e-9)


def test_rhs_default_target_closes_the_day(fixture_model):
    # target = model mean makes the cumulative deviation return to ~0
    rhs = build_rhs(fixture_model)
    assert abs(rhs(23.5)) < 1e-8
    assert rhs.target == pytest.approx(fixture_model.average(), rel=1e-12)


def test_rhs_vectorized(fixture_model):
    rhs = build_rhs(fixture_model)
    ts = np.array([0.0, 1.0, 7.5, 23.5])
    vec = rhs(ts)
    assert vec.shape == ts.shape
    for t, v in zip(ts, vec):
        assert float(v) == pytest.approx(rhs(float(t)), rel=1e-13, abs=1e-12)


# ------------------------------------------------------- segment marching

def test_segment_closure_frozen():
    got = solve_segments((0.0, 5.0, 10.0, 15.0, 19.0, 23.5), DEMO_FRACTIONS, 23.5)
    expect = [
        0.0, 5.0, 20.0 / 3.0, 80.0 / 9.0, 10.0, 320.0 / 27.0, 40.0 / 3.0,
        15.0, 1280.0 / 81.0, 160.0 / 9.0, 19.0, 20.0, 5120.0 / 243.0, 23.5,
    ]
    assert len(got) == len(expect)
    for g, e in zip(got, expect):
        assert g == pytest.approx(e, rel=1e-12)


def test_segment_closure_is_preimage_closed():
    bounds = solve_segments((0.0, 5.0, 10.0, 15.0, 19.0, 23.5), DEMO_FRACTIONS, 23.5)
    interior = [b for b in bounds if 0.0 < b < 23.5]
    for b in interior:
        for q in DEMO_FRACTIONS:
            pre = b / q
            if pre <= 23.5:
                assert any(abs(pre - c) < 1e-9 * max(1.0, pre) for c in bounds), (b, q)


def test_march_recovers_global_polynomial(demo_kernel):
    # exact solution x(s) = s across all closed segments
    bounds = solve_segments((0.0, 5.0, 10.0, 15.0, 19.0, 23.5), DEMO_FRACTIONS, 23.5)
    rhs = forward_rhs(demo_kernel, lambda s: s)
    sol = march_solve(demo_kernel, rhs, bounds, degree=4)
    grid = np.linspace(0.05, 23.5, 400)
    assert np.max(np.abs(sol(grid) - grid)) < 1e-10

    probes = np.linspace(1.0, 23.5, 24)
    assert strategy_residual(demo_kernel, rhs, sol, probes) < 1e-10


def test_march_bounds_validation(demo_kernel):
    rhs = forward_rhs(demo_kernel, lambda s: s)
    with pytest.raises(ValueError):
        march_solve(demo_kernel, rhs, (1.0, 2.0), degree=3)
    with pytest.raises(ValueError):
        march_solve(demo_kernel, rhs, (0.0, 2.0, 2.0), degree=3)


def test_apply_operator_constant_solution(demo_kernel):
    bounds = (0.0, 10.0, 23.5)
    sol = march_solve(demo_kernel, lambda t: RATE_SUM * t, bounds, degree=3)
    for t in (0.5, 9.0, 15.0, 23.5):
        assert apply_operator(demo_kernel, sol, t) == pytest.approx(
            RATE_SUM * t, rel=1e-10
        )


def test_manufactured_sinusoid_strategy(demo_kernel):
    # daily sinusoidal storage profile pushed through the efficiency kernel
    x = lambda s: 50.0 * math.sin(2.0 * math.pi * s / 24.0)
    rhs = forward_rhs(demo_kernel, x, order=24)
    bounds = (0.0, 6.0, 12.0, 18.0, 24.0)
    sol = march_solve(demo_kernel, rhs, bounds, degree=8)
    grid = np.linspace(0.1, 24.0, 300)
    exact = 50.0 * np.sin(2.0 * np.pi * grid / 24.0)
    assert np.max(np.abs(sol(grid) - exact)) < 0.5  # MW


# ---------------------------------------------------------------- oracle

def test_oracle_linear_solution(unit_kernel):
    problem = VolterraProblem(
        kernel=unit_kernel, rhs=lambda t: t * t / 2.0, interval=(0.0, 1.0)
    )
    oracle = brute_force_oracle(problem, 10_000)
    assert np.max(np.abs(oracle.values - oracle.times)) < 1e-4


def test_oracle_demo_kernel_constant(demo_kernel):
    problem = VolterraProblem(
        kernel=demo_kernel, rhs=lambda t: RATE_SUM * t, interval=(0.0, 24.0)
    )
    oracle = brute_force_oracle(problem, 10_000)
    assert np.max(np.abs(oracle.values - 1.0)) < 1e-4


def test_oracle_fast_and_generic_paths_agree(demo_kernel):
    from voltaic import BoundaryCurve, KernelPiece, PiecewiseKernel

    rhs = lambda t: 0.4421875 * t * t  # forward f for x(s) = s
    problem = VolterraProblem(kernel=demo_kernel, rhs=rhs, interval=(0.0, 12.0))
    fast = brute_force_oracle(problem, 4_000)

    # same kernel with opaque rate callables: forces the generic O(N^2) path
    opaque = PiecewiseKernel(
        pieces=tuple(
            KernelPiece(
                lower=p.lower,
                upper=p.upper,
                rate=(lambda t, s, v=v: v),
            )
            for p, v in zip(demo_kernel.pieces, DEMO_VALUES)
        )
    )
    generic = brute_force_oracle(
        VolterraProblem(kernel=opaque, rhs=rhs, interval=(0.0, 12.0)), 4_000
    )
    assert np.max(np.abs(fast.values - generic.values)) < 1e-10


def test_oracle_zero_diagonal_raises():
    kernel = piecewise_constant([1.0, 0.0], [0.5])
    problem = VolterraProblem(kernel=kernel, rhs=lambda t: t, interval=(0.0, 1.0))
    with pytest.raises(ZeroDiagonalError):
        brute_force_oracle(problem, 200)


def test_oracle_needs_enough_steps(unit_kernel):
    problem = VolterraProblem(kernel=unit_kernel, rhs=lambda t: t, interval=(0.0, 1.0))
    with pytest.raises(ValueError):
        brute_force_oracle(problem, 50)


def test_oracle_interpolates(unit_kernel):
    problem = VolterraProblem(
        kernel=unit_kernel, rhs=lambda t: t * t / 2.0, interval=(0.0, 1.0)
    )
    oracle = brute_force_oracle(problem, 2_000)
    assert oracle(0.5) == pytest.approx(0.5, abs=1e-4)
    out = oracle(np.array([0.25, 0.75]))
    assert out == pytest.approx([0.25, 0.75], abs=1e-4)


# ---------------------------------------------------------- full pipeline

@pytest.fixture(scope="module")
def fixture_strategy(fixture_series, demo_kernel_module):
    cfg = CollocationConfig(degree=6, interval=(0.0, 23.5))
    return compute_strategy(
        fixture_series, demo_kernel_module, cfg, DsaConfig(seed=0)
    )


@pytest.fixture(scope="module")
def demo_kernel_module():
    return piecewise_constant(list(DEMO_VALUES), list(DEMO_FRACTIONS))


def test_strategy_escalation_result(fixture_strategy):
    _, optimal = fixture_strategy
    assert optimal is not None
    assert optimal.converged
    assert 5 <= optimal.optimal_degree <= 15


def test_strategy_soc_is_trapezoidal_integral(fixture_strategy):
    strat, _ = fixture_strategy
    assert strat.soc[0] == 0.0
    expect = cumulative_trapezoid(strat.acpf, strat.times, initial=0.0)
    assert np.max(np.abs(strat.soc - expect)) < 1e-9 * max(1.0, np.max(np.abs(expect)))


def test_strategy_charges_trough_discharges_peak(fixture_strategy, fixture_series):
    strat, _ = fixture_strategy
    # generation formula peaks at 12 h and bottoms overnight
    assert strat.acpf[0] > 0.0  # charging at midnight
    midday = np.searchsorted(strat.times, 12.0)
    assert strat.acpf[midday] < 0.0  # discharging at the peak
    signs = np.sign(strat.acpf)
    changes = int(np.sum(np.abs(np.diff(signs)) > 0))
    assert 1 <= changes <= 4


def test_strategy_soc_returns_near_zero(fixture_strategy):
    strat, _ = fixture_strategy
    assert abs(strat.soc[-1]) < 0.10 * np.max(np.abs(strat.soc))


def test_strategy_satisfies_equation(fixture_strategy):
    strat, _ = fixture_strategy
    probes = np.linspace(23.5 / 20.0, 23.5, 20)
    resid = strategy_residual(
        piecewise_constant(list(DEMO_VALUES), list(DEMO_FRACTIONS)),
        strat.rhs,
        strat.solution,
        probes,
    )
    fmax = float(np.max(np.abs(strat.rhs(probes))))
    assert resid < 1e-6 * fmax


def test_strategy_agrees_with_oracle_between_kinks(
    fixture_strategy, fixture_model, demo_kernel_module
):
    # pointwise comparison is only meaningful away from the model-window
    # breakpoints, where the exact solution itself jumps
    strat, _ = fixture_strategy
    problem = VolterraProblem(
        kernel=demo_kernel_module,
        rhs=build_rhs(fixture_model),
        interval=(0.0, 23.5),
    )
    oracle = brute_force_oracle(problem, 10_000)
    grid = np.linspace(0.2, 23.5, 1500)
    keep = np.ones_like(grid, dtype=bool)
    for kink in fixture_model.bounds[1:-1]:
        keep &= np.abs(grid - kink) > 0.05
    dev = strat.solution(grid[keep]) - oracle(grid[keep])
    rms = float(np.sqrt(np.mean(dev**2)))
    assert rms < 0.5  # MW, on a ~690 MW peak strategy


def test_zero_deviation_means_zero_strategy(unit_kernel):
    times = np.linspace(0.0, 23.5, 48)
    series = LoadSeries(times, np.full(48, 3000.0))
    cfg = CollocationConfig(degree=4, interval=(0.0, 23.5))
    strat, _ = compute_strategy(series, unit_kernel, cfg, None)
    assert np.max(np.abs(strat.acpf)) < 1e-8 * 3000.0
    assert np.max(np.abs(strat.soc)) < 1e-7 * 3000.0


def test_target_override_shifts_strategy(fixture_series, demo_kernel_module):
    cfg = CollocationConfig(degree=6, interval=(0.0, 23.5))
    lo, _ = compute_strategy(
        fixture_series, demo_kernel_module, cfg, None, target=2900.0
    )
    hi, _ = compute_strategy(
        fixture_series, demo_kernel_module, cfg, None, target=3100.0
    )
    # a higher target means more charging everywhere
    assert np.all(hi.acpf > lo.acpf)
    assert hi.target == 3100.0


def test_probe_time_must_be_positive(fixture_series, demo_kernel_module):
    cfg = CollocationConfig(degree=6, interval=(0.0, 23.5))
    strat, opt = compute_strategy(
        fixture_series, demo_kernel_module, cfg, DsaConfig(seed=1), probe_time=-5.0
    )
    # clamped into the first segment rather than rejected
    assert opt is not None and opt.probe > 0.0
