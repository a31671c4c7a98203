"""Command-line front end.

Subcommands:
  solve            solve one first-kind Volterra problem, emit x on a grid
  level            load-leveling pipeline: series -> strategy (+ report)
  converge         interval-halving convergence study on a built-in bench
  validate-kernel  check a kernel chain over an interval
  dsa-selftest     sanity battery for the stochastic arithmetic

Exit codes: 0 success, 1 configuration/usage error, 2 numeric or I/O
failure.  ``VOLTAIC_SEED`` provides the default stochastic seed.  Outputs
are UTF-8 CSV, deterministic for a fixed seed.

Inline grammars (documented in the README):
  kernel   values@fractions, e.g. ``[1,0.9,0.85]@[0.25,0.75]``
  rhs      ``poly:c0,c1,...`` meaning f(t) = c0 + c1*t + ...
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from .accuracy import optimal_solve, report_csv
from .collocation import (
    MAX_DEGREE,
    CollocationConfig,
    collocation_residual,
    solve as solve_problem,
)
from .config import ConfigError, RunConfig, load_run_config
from .kernels import BadFractionsError, PiecewiseKernel, VolterraProblem, piecewise_constant
from .leveling import (
    NonMonotonicTime,
    ParseError,
    RankDeficientFit,
    ZeroDiagonalError,
    compute_strategy,
    fixture_path,
    load_csv,
    strategy_residual,
)
from .linalg import SingularMatrixError
from .stochastic import DsaConfig, StochasticContext, StochasticError, significant_string

_NUMERIC_ERRORS = (
    SingularMatrixError,
    StochasticError,
    ZeroDiagonalError,
    RankDeficientFit,
    ParseError,
    NonMonotonicTime,
    OSError,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as exit code 1, not 2."""

    def error(self, message: str):  # noqa: D102 - argparse override
        raise _UsageError(message)


def _env_seed() -> int:
    raw = os.environ.get("VOLTAIC_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"VOLTAIC_SEED: expected an integer, got {raw!r}") from None


def parse_kernel(text: str) -> PiecewiseKernel:
    """``values@fractions`` with optional brackets on either list."""
    if text.count("@") != 1:
        raise ConfigError(f"kernel: expected values@fractions, got {text!r}")
    vals_s, fracs_s = text.split("@")

    def floats(side: str, name: str) -> list[float]:
        side = side.strip()
        if side.startswith("[") and side.endswith("]"):
            side = side[1:-1]
        items = [s for s in (p.strip() for p in side.split(",")) if s]
        try:
            return [float(s) for s in items]
        except ValueError as e:
            raise ConfigError(f"kernel {name}: {e}") from None

    try:
        return piecewise_constant(floats(vals_s, "values"), floats(fracs_s, "fractions"))
    except BadFractionsError as e:
        raise ConfigError(f"kernel: {e}") from None


def parse_rhs(text: str):
    """``poly:c0,c1,...`` -> polynomial f(t)."""
    if not text.startswith("poly:"):
        raise ConfigError(f"rhs: expected poly:c0,c1,..., got {text!r}")
    try:
        coefs = [float(s) for s in text[len("poly:") :].split(",") if s.strip()]
    except ValueError as e:
        raise ConfigError(f"rhs: {e}") from None
    if not coefs:
        raise ConfigError("rhs: need at least one coefficient")

    def f(t, _c=tuple(coefs)):
        return np.polynomial.polynomial.polyval(t, _c)

    return f


def _parse_interval(text: str) -> tuple[float, float]:
    try:
        a, b = (float(s) for s in text.split(","))
    except ValueError:
        raise ConfigError(f"interval: expected a,b with a < b, got {text!r}") from None
    if not a < b:
        raise ConfigError(f"interval: expected a < b, got {text!r}")
    return a, b


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="voltaic", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="solve one first-kind Volterra problem")
    ps.add_argument("--kernel", default="[1,0.9,0.85]@[0.25,0.75]")
    ps.add_argument("--rhs", required=True, help="poly:c0,c1,...")
    ps.add_argument("--degree", type=int, required=True)
    ps.add_argument("--interval", default="0,24", help="a,b (hours)")
    ps.add_argument("--expansion", default="midpoint", help='"midpoint" or a number')
    ps.add_argument("--grid", type=int, default=49, help="output sample count")
    ps.add_argument("--out", default=None)

    pl = sub.add_parser("level", help="compute a charge/discharge strategy")
    pl.add_argument("--config", default=None, help="TOML/JSON run config")
    pl.add_argument("--input", default=None, help="load CSV (default: bundled fixture)")
    pl.add_argument("--kernel", default=None)
    pl.add_argument("--degree", type=int, default=None)
    pl.add_argument("--target", type=float, default=None, help="level to hold (MW); default: model mean")
    pl.add_argument("--dsa", action="store_true", help="choose the degree by stochastic escalation")
    pl.add_argument("--seed", type=int, default=None)
    pl.add_argument("--n-min", type=int, default=None)
    pl.add_argument("--n-max", type=int, default=None)
    pl.add_argument("--probe", type=float, default=None, help="probe time (hours) for the escalation")
    pl.add_argument("--out", default=None, help="strategy CSV (default stdout)")
    pl.add_argument("--report", default=None, help="escalation report CSV (default stdout)")

    pc = sub.add_parser("converge", help="interval-halving convergence study")
    pc.add_argument("--bench", required=True, choices=["exp", "sin", "poly"])
    pc.add_argument("--degree", type=int, required=True)
    pc.add_argument("--halvings", type=int, default=4)
    pc.add_argument("--out", default=None)

    pv = sub.add_parser("validate-kernel", help="check a kernel chain")
    pv.add_argument("--kernel", required=True)
    pv.add_argument("--interval", default="0,24")
    pv.add_argument("--checks", type=int, default=64)

    pd = sub.add_parser("dsa-selftest", help="stochastic arithmetic sanity battery")
    pd.add_argument("--seed", type=int, default=None)

    return p


def cmd_solve(args) -> int:
    kernel = parse_kernel(args.kernel)
    rhs = parse_rhs(args.rhs)
    interval = _parse_interval(args.interval)
    if args.expansion == "midpoint":
        expansion = None
    else:
        try:
            expansion = float(args.expansion)
        except ValueError:
            raise ConfigError(
                f'expansion: expected "midpoint" or a number, got {args.expansion!r}'
            ) from None
    if args.grid < 2:
        raise ConfigError(f"grid: need >= 2 samples, got {args.grid}")
    try:
        cfg = CollocationConfig(
            degree=args.degree, interval=interval, expansion_point=expansion
        )
    except ValueError as e:
        raise ConfigError(str(e)) from None

    problem = VolterraProblem(kernel=kernel, rhs=rhs, interval=interval)
    sol = solve_problem(problem, cfg)
    resid = collocation_residual(problem, cfg, sol)
    ts = np.linspace(interval[0], interval[1], args.grid)
    lines = ["t,x"] + [f"{t:.10g},{x:.10g}" for t, x in zip(ts, sol.evaluate_many(ts))]
    _write(args.out, "\n".join(lines) + "\n")
    print(f"degree {args.degree}; max collocation residual {resid:.3e}", file=sys.stderr)
    return 0


def _merged_level_config(args) -> RunConfig:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    seed = args.seed if args.seed is not None else (cfg.seed if args.config else _env_seed())

    def pick(flag, file_value):
        return flag if flag is not None else file_value

    return RunConfig(
        kernel_values=cfg.kernel_values,
        kernel_fractions=cfg.kernel_fractions,
        degree=pick(args.degree, cfg.degree),
        expansion_point=cfg.expansion_point,
        quadrature_order=cfg.quadrature_order,
        dsa_enabled=args.dsa or cfg.dsa_enabled,
        dsa_samples=cfg.dsa_samples,
        dsa_tau=cfg.dsa_tau,
        seed=seed,
        n_min=pick(args.n_min, cfg.n_min),
        n_max=pick(args.n_max, cfg.n_max),
        target=pick(args.target, cfg.target),
        probe_time=pick(args.probe, cfg.probe_time),
        input_path=pick(args.input, cfg.input_path),
        output_path=pick(args.out, cfg.output_path),
        report_path=pick(args.report, cfg.report_path),
    )


def cmd_level(args) -> int:
    run = _merged_level_config(args)
    if args.kernel is not None:
        kernel = parse_kernel(args.kernel)
    else:
        kernel = piecewise_constant(run.kernel_values, run.kernel_fractions)
    path = Path(run.input_path) if run.input_path else fixture_path()
    if not path.exists():
        raise FileNotFoundError(f"input file not found: {path}")
    series = load_csv(path)

    horizon = (0.0, float(series.times[-1]))
    try:
        coll = CollocationConfig(
            degree=run.degree,
            interval=horizon,
            expansion_point=run.expansion_point,
            quadrature_order=run.quadrature_order,
        )
    except ValueError as e:
        raise ConfigError(str(e)) from None
    dsa = (
        DsaConfig(samples=run.dsa_samples, tau=run.dsa_tau, seed=run.seed)
        if run.dsa_enabled
        else None
    )

    strategy, optimal = compute_strategy(
        series,
        kernel,
        coll,
        dsa,
        target=run.target,
        probe_time=run.probe_time,
        n_min=run.n_min,
        n_max=run.n_max,
    )
    lines = ["time_hours,acpf_mw,soc_mwh"] + [
        f"{t:.10g},{a:.10g},{s:.10g}"
        for t, a, s in zip(strategy.times, strategy.acpf, strategy.soc)
    ]
    _write(run.output_path, "\n".join(lines) + "\n")
    if optimal is not None:
        _write(run.report_path, report_csv(optimal))

    degree = optimal.optimal_degree if optimal is not None else run.degree
    probes = np.linspace(horizon[1] / 20.0, horizon[1], 20)
    resid = strategy_residual(kernel, strategy.rhs, strategy.solution, probes)
    print(
        f"target {strategy.target:.6g} MW; degree {degree}; "
        f"max equation residual {resid:.3e}",
        file=sys.stderr,
    )
    return 0


_BENCHES = {
    "exp": (lambda t: math.exp(t) - 1.0, math.exp),
    "sin": (lambda t: math.sin(t), math.cos),
    "poly": (lambda t: t**3, lambda s: 3.0 * s * s),
}

_ROUNDOFF_FLOOR = 1e-12


def cmd_converge(args) -> int:
    rhs, exact = _BENCHES[args.bench]
    if not 1 <= args.degree <= MAX_DEGREE:
        raise ConfigError(f"degree: must be in [1, {MAX_DEGREE}], got {args.degree}")
    if args.halvings < 1:
        raise ConfigError(f"halvings: need >= 1, got {args.halvings}")
    kernel = piecewise_constant([1.0], [])
    errors = []
    widths = [2.0**-k for k in range(args.halvings + 1)]
    for h in widths:
        problem = VolterraProblem(kernel=kernel, rhs=rhs, interval=(0.0, h))
        cfg = CollocationConfig(degree=args.degree, interval=(0.0, h))
        sol = solve_problem(problem, cfg)
        grid = np.linspace(h * 1e-6, h, 33)
        errors.append(float(np.max(np.abs(sol.evaluate_many(grid) - np.vectorize(exact)(grid)))))

    lines = ["h,max_error,order"]
    orders: list[float] = []
    for k, (h, err) in enumerate(zip(widths, errors)):
        if k == 0:
            lines.append(f"{h:.10g},{err:.6e},")
            continue
        if errors[k - 1] < _ROUNDOFF_FLOOR or err < _ROUNDOFF_FLOOR:
            lines.append(f"{h:.10g},{err:.6e},exact")
            continue
        order = math.log2(errors[k - 1] / err)
        orders.append(order)
        lines.append(f"{h:.10g},{err:.6e},{order:.3f}")
    _write(args.out, "\n".join(lines) + "\n")
    if orders:
        print(f"observed order: mean {sum(orders) / len(orders):.3f} (expect ~{args.degree + 1})", file=sys.stderr)
    else:
        print("observed order: exact (errors at round-off floor)", file=sys.stderr)
    return 0


def cmd_validate_kernel(args) -> int:
    kernel = parse_kernel(args.kernel)
    interval = _parse_interval(args.interval)
    if args.checks < 2:
        raise ConfigError(f"checks: need >= 2, got {args.checks}")
    violations = kernel.validate(interval, checks=args.checks)
    if not violations:
        print(f"ok: {len(kernel.pieces)} band(s), no violations at {args.checks} sample times")
        return 0
    for v in violations:
        print(f"t={v.t:.10g}: {v.kind}: {v.detail}")
    print(f"{len(violations)} violation(s)", file=sys.stderr)
    return 2


def cmd_dsa_selftest(args) -> int:
    seed = args.seed if args.seed is not None else _env_seed()
    ctx = StochasticContext(DsaConfig(seed=seed))
    checks: list[tuple[str, bool, str]] = []

    third = ctx.exact(1.0) / ctx.exact(3.0)
    cancel = third * 3.0 - 1.0
    checks.append(("(1/3)*3 - 1 is informatical zero", cancel.is_zero(), str(cancel)))

    x = ctx.exact(0.1) + ctx.exact(0.2)
    checks.append(("x - x is informatical zero", (x - x).is_zero(), str(x - x)))

    four = ctx.exact(2.0) + ctx.exact(2.0)
    checks.append(("2 + 2 keeps all digits", (not four.is_zero()) and float(four) == 4.0, str(four)))

    digits = third.report().digits
    checks.append(("1/3 carries >= 13 digits", digits >= 13.0, f"{digits:.2f} digits"))

    try:
        _ = ctx.exact(1.0) / cancel
        division_guarded = False
    except StochasticError:
        division_guarded = True
    checks.append(("division by informatical zero is refused", division_guarded, ""))

    ok = True
    for name, passed, detail in checks:
        tag = "pass" if passed else "FAIL"
        suffix = f"  [{detail}]" if detail else ""
        print(f"{tag}: {name}{suffix}")
        ok = ok and passed
    print(f"significant-string sample: {significant_string(third)}")
    return 0 if ok else 2


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1

    dispatch = {
        "solve": cmd_solve,
        "level": cmd_level,
        "converge": cmd_converge,
        "validate-kernel": cmd_validate_kernel,
        "dsa-selftest": cmd_dsa_selftest,
    }
    try:
        return dispatch[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except _NUMERIC_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        # domain validation surfaced from library types (bad problem data)
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
