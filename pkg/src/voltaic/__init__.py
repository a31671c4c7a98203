"""Self-validating solver for first-kind Volterra equations with
piecewise kernels, plus a battery load-leveling pipeline built on it.

The numerical layer is generic over the scalar: plain floats for speed,
or stochastic-arithmetic samples (``StochasticContext``) whose shared
digits estimate how many figures of a result are significant.
"""

from .accuracy import (
    DegreeRow,
    GapRow,
    OptimalResult,
    ncsd_gap,
    optimal_solve,
    report_csv,
)
from .collocation import (
    CollocationConfig,
    TaylorSolution,
    assemble,
    collocation_points,
    collocation_residual,
    evaluate_solution,
    solve,
)
from .config import ConfigError, RunConfig, load_run_config
from .kernels import (
    BadFractionsError,
    BoundaryCurve,
    KernelPiece,
    OutOfDomainError,
    PiecewiseKernel,
    Violation,
    VolterraProblem,
    piecewise_constant,
)
from .leveling import (
    LeveledRhs,
    LoadModel,
    LoadSeries,
    NonMonotonicTime,
    OracleSolution,
    ParseError,
    PiecewiseSolution,
    RankDeficientFit,
    StrategyResult,
    ZeroDiagonalError,
    apply_operator,
    brute_force_oracle,
    build_rhs,
    compute_strategy,
    fit_windows,
    fixture_path,
    load_csv,
    march_solve,
    solve_segments,
    strategy_residual,
)
from .linalg import DenseSystem, SingularMatrixError, lu_solve
from .quadrature import gauss_legendre, integrate
from .stochastic import (
    DivisionByStochasticZero,
    DsaConfig,
    NcsdReport,
    StochasticContext,
    StochasticError,
    StochasticOverflow,
    StochasticValue,
    cestac_digits,
    ncsd_pair,
    ncsd_report,
    significant_string,
)

__version__ = "0.1.0"

__all__ = [
    "BadFractionsError",
    "BoundaryCurve",
    "CollocationConfig",
    "ConfigError",
    "DegreeRow",
    "DenseSystem",
    "DivisionByStochasticZero",
    "DsaConfig",
    "GapRow",
    "KernelPiece",
    "LeveledRhs",
    "LoadModel",
    "LoadSeries",
    "NcsdReport",
    "NonMonotonicTime",
    "OptimalResult",
    "OracleSolution",
    "OutOfDomainError",
    "ParseError",
    "PiecewiseKernel",
    "PiecewiseSolution",
    "RankDeficientFit",
    "RunConfig",
    "SingularMatrixError",
    "StochasticContext",
    "StochasticError",
    "StochasticOverflow",
    "StochasticValue",
    "StrategyResult",
    "TaylorSolution",
    "Violation",
    "VolterraProblem",
    "ZeroDiagonalError",
    "apply_operator",
    "assemble",
    "brute_force_oracle",
    "build_rhs",
    "cestac_digits",
    "collocation_points",
    "collocation_residual",
    "compute_strategy",
    "evaluate_solution",
    "fit_windows",
    "fixture_path",
    "gauss_legendre",
    "integrate",
    "load_csv",
    "load_run_config",
    "lu_solve",
    "march_solve",
    "ncsd_gap",
    "ncsd_pair",
    "ncsd_report",
    "optimal_solve",
    "piecewise_constant",
    "report_csv",
    "significant_string",
    "solve",
    "solve_segments",
    "strategy_residual",
]
