"""Run-configuration parsing: TOML/JSON, defaults, field-path diagnostics."""

import json

import pytest

from voltaic import ConfigError, RunConfig, load_run_config

FULL_TOML = """
[kernel]
values = [1.0, 0.9, 0.85]
fractions = [0.25, 0.75]

[collocation]
degree = 8
expansion_point = 11.75
quadrature_order = 20

[dsa]
enabled = true
samples = 3
tau = 4.303
seed = 7
n_min = 3
n_max = 12

[leveling]
target = 3050.0
probe_time = 2.5

[io]
input = "loads.csv"
output = "strategy.csv"
report = "report.csv"
"""


def test_full_toml_roundtrip(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(FULL_TOML)
    cfg = load_run_config(p)
    assert cfg.kernel_values == (1.0, 0.9, 0.85)
    assert cfg.kernel_fractions == (0.25, 0.75)
    assert cfg.degree == 8
    assert cfg.expansion_point == 11.75
    assert cfg.quadrature_order == 20
    assert cfg.dsa_enabled is True
    assert cfg.seed == 7
    assert cfg.n_min == 3 and cfg.n_max == 12
    assert cfg.target == 3050.0
    assert cfg.probe_time == 2.5
    assert cfg.input_path == "loads.csv"
    assert cfg.output_path == "strategy.csv"
    assert cfg.report_path == "report.csv"


def test_json_config(tmp_path):
    p = tmp_path / "run.json"
    p.write_text(json.dumps({"collocation": {"degree": 4}, "dsa": {"enabled": True}}))
    cfg = load_run_config(p)
    assert cfg.degree == 4
    assert cfg.dsa_enabled is True


def test_defaults_from_empty_file(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text("")
    cfg = load_run_config(p)
    assert cfg == RunConfig()
    assert cfg.degree == 6
    assert cfg.kernel_values == (1.0, 0.9, 0.85)
    assert cfg.dsa_enabled is False


def test_unknown_section_rejected(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text("[mystery]\nx = 1\n")
    with pytest.raises(ConfigError, match="mystery"):
        load_run_config(p)


def test_type_error_names_field_path(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text('[collocation]\ndegree = "six"\n')
    with pytest.raises(ConfigError, match="collocation.degree"):
        load_run_config(p)


def test_bool_rejected_for_numeric_field(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text("[dsa]\nsamples = true\n")
    with pytest.raises(ConfigError, match="dsa.samples"):
        load_run_config(p)


def test_expansion_point_keyword(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text('[collocation]\nexpansion_point = "midpoint"\n')
    assert load_run_config(p).expansion_point is None

    p.write_text('[collocation]\nexpansion_point = "edge"\n')
    with pytest.raises(ConfigError, match="expansion_point"):
        load_run_config(p)


def test_degree_bounds_checked(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text("[collocation]\ndegree = -2\n")
    with pytest.raises(ConfigError, match="degree"):
        load_run_config(p)


def test_escalation_window_checked(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text("[dsa]\nn_min = 9\nn_max = 9\n")
    with pytest.raises(ConfigError, match="n_max"):
        load_run_config(p)


def test_sample_count_checked(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text("[dsa]\nsamples = 1\n")
    with pytest.raises(ConfigError, match="samples"):
        load_run_config(p)


def test_fraction_list_type_checked(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text('[kernel]\nfractions = ["a", "b"]\n')
    with pytest.raises(ConfigError, match="kernel.fractions"):
        load_run_config(p)
