"""Run-configuration files (TOML or JSON) for the command line.

A config collects what the `level` pipeline needs: the kernel, collocation
settings, stochastic-arithmetic settings, the target level, and I/O paths.
Command-line flags override file values.  Validation failures carry the
dotted field path, e.g. ``collocation.degree: expected an integer``.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

__all__ = ["ConfigError", "RunConfig", "load_run_config"]


class ConfigError(ValueError):
    """Invalid run configuration; message names the offending field."""


@dataclass(frozen=True)
class RunConfig:
    """Parsed, type-checked run configuration with CLI-compatible fields."""

    kernel_values: tuple[float, ...] = (1.0, 0.9, 0.85)
    kernel_fractions: tuple[float, ...] = (0.25, 0.75)
    degree: int = 6
    expansion_point: float | None = None  # None = interval midpoint
    quadrature_order: int | None = None
    dsa_enabled: bool = False
    dsa_samples: int = 3
    dsa_tau: float = 4.303
    seed: int = 0
    n_min: int = 2
    n_max: int = 15
    target: float | None = None
    probe_time: float | None = None
    input_path: str | None = None
    output_path: str | None = None
    report_path: str | None = None


def _expect(table: dict, section: str, key: str, kinds, default, *, required=False):
    path = f"{section}.{key}" if section else key
    if key not in table:
        if required:
            raise ConfigError(f"{path}: required field is missing")
        return default
    value = table[key]
    names = {int: "an integer", float: "a number", str: "a string", bool: "a boolean", list: "a list"}
    for kind in kinds:
        if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        if kind is int and isinstance(value, int) and not isinstance(value, bool):
            return int(value)
        if isinstance(value, kind) and not (kind is not bool and isinstance(value, bool)):
            return value
    wanted = " or ".join(names.get(k, k.__name__) for k in kinds)
    raise ConfigError(f"{path}: expected {wanted}, got {value!r}")


def _float_list(table: dict, section: str, key: str, default):
    raw = _expect(table, section, key, (list,), None)
    if raw is None:
        return default
    out = []
    for i, x in enumerate(raw):
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise ConfigError(f"{section}.{key}[{i}]: expected a number, got {x!r}")
        out.append(float(x))
    return tuple(out)


def _section(data: dict, name: str) -> dict:
    sec = data.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"{name}: expected a table/object, got {sec!r}")
    return sec


def load_run_config(path: str | Path) -> RunConfig:
    """Parse and validate a TOML (default) or JSON run configuration."""
    path = Path(path)
    text = path.read_bytes()
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(text.decode("utf-8"))
        else:
            data = tomllib.loads(text.decode("utf-8"))
    except (ValueError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"{path}: unparseable config: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a table/object")

    known = {"kernel", "collocation", "dsa", "leveling", "io"}
    stray = set(data) - known
    if stray:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(stray))}")

    kernel = _section(data, "kernel")
    coll = _section(data, "collocation")
    dsa = _section(data, "dsa")
    lev = _section(data, "leveling")
    io = _section(data, "io")

    expansion = coll.get("expansion_point", None)
    if expansion is not None:
        if expansion == "midpoint":
            expansion = None
        elif isinstance(expansion, (int, float)) and not isinstance(expansion, bool):
            expansion = float(expansion)
        else:
            raise ConfigError(
                f'collocation.expansion_point: expected "midpoint" or a number, got {expansion!r}'
            )

    cfg = RunConfig(
        kernel_values=_float_list(kernel, "kernel", "values", (1.0, 0.9, 0.85)),
        kernel_fractions=_float_list(kernel, "kernel", "fractions", (0.25, 0.75)),
        degree=_expect(coll, "collocation", "degree", (int,), 6),
        expansion_point=expansion,
        quadrature_order=_expect(coll, "collocation", "quadrature_order", (int,), None),
        dsa_enabled=_expect(dsa, "dsa", "enabled", (bool,), False),
        dsa_samples=_expect(dsa, "dsa", "samples", (int,), 3),
        dsa_tau=_expect(dsa, "dsa", "tau", (float,), 4.303),
        seed=_expect(dsa, "dsa", "seed", (int,), 0),
        n_min=_expect(dsa, "dsa", "n_min", (int,), 2),
        n_max=_expect(dsa, "dsa", "n_max", (int,), 15),
        target=_expect(lev, "leveling", "target", (float,), None),
        probe_time=_expect(lev, "leveling", "probe_time", (float,), None),
        input_path=_expect(io, "io", "input", (str,), None),
        output_path=_expect(io, "io", "output", (str,), None),
        report_path=_expect(io, "io", "report", (str,), None),
    )
    if cfg.degree < 0:
        raise ConfigError(f"collocation.degree: must be >= 0, got {cfg.degree}")
    if cfg.dsa_samples < 2:
        raise ConfigError(f"dsa.samples: must be >= 2, got {cfg.dsa_samples}")
    if cfg.n_max < cfg.n_min + 1:
        raise ConfigError(f"dsa.n_max: must be >= n_min + 1, got {cfg.n_max} (n_min {cfg.n_min})")
    return cfg
