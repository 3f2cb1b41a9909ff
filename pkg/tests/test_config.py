import math

import pytest

from abelkit.config import ConfigError, load_config, parse_config
from abelkit.catalog import EXAMPLES, example_config

BASE = """
[equation]
label = "demo"
a = "-1"
b = 0
c = "1"
d = "-0.3849 * sin(t)^2"

[interval]
t0 = 0
t1 = "10*pi"
closed_right = true
"""


def test_minimal_config():
    cfg = parse_config(BASE)
    assert cfg.equation.label == "demo"
    assert cfg.equation.coefficients(math.pi / 2)[3] == pytest.approx(-0.3849)
    assert cfg.interval.t1 == pytest.approx(10 * math.pi)
    assert cfg.interval.closed_right
    assert cfg.references == [] and cfg.partition is None


def test_optional_tables():
    text = BASE + """
[[references]]
a = 1
b = 3
c = 3
d = 1

[partition]
period = "pi"

[witnesses]
eta = "sqrt(3)/3"
y1_init = -1
direction = "below"

[solver]
rel_tol = 1e-9
max_steps = 5000

[closed]
strategy = "Thm51"
T = "pi"

[outputs]
dir = "results"
"""
    cfg = parse_config(text, base_dir=__import__("pathlib").Path("/tmp/x"))
    assert len(cfg.references) == 1
    assert cfg.partition.period == pytest.approx(math.pi)
    assert cfg.witnesses["eta"].eval(0.0) == pytest.approx(math.sqrt(3) / 3)
    assert cfg.witnesses["y1_init"] == -1.0
    assert cfg.solver.rel_tol == 1e-9 and cfg.solver.max_steps == 5000
    assert cfg.closed == {"strategy": "Thm51", "T": pytest.approx(math.pi)}
    assert str(cfg.outputs) == "/tmp/x/results"


def test_explicit_partition_points():
    cfg = parse_config(BASE + "\n[partition]\npoints = [0, 1, 2]\n")
    assert cfg.partition.points == (0.0, 1.0, 2.0, math.inf)


def test_unbounded_interval_with_horizon():
    cfg = parse_config(BASE.replace('t1 = "10*pi"', 'horizon = 20'))
    assert math.isinf(cfg.interval.t1) and cfg.horizon == 20.0


@pytest.mark.parametrize(
    "replace, line, fragment",
    [
        (('d = "-0.3849 * sin(t)^2"', 'd = "sin(t"'), 7, "equation.d"),
        (('t1 = "10*pi"', 't1 = "t"'), 11, "must not depend on t"),
        (('t1 = "10*pi"', 't1 = -1'), 11, ""),
        (("b = 0", "b = "), 5, ""),
    ],
)
def test_errors_carry_line_numbers(replace, line, fragment):
    text = BASE.replace(*replace)
    with pytest.raises(ConfigError) as info:
        parse_config(text, source="run.toml")
    assert str(info.value).startswith(f"run.toml:{line}:")
    assert fragment in str(info.value)
    assert info.value.line == line


def test_missing_pieces():
    with pytest.raises(ConfigError, match="missing \\[equation\\]"):
        parse_config("[interval]\nt1 = 1\n")
    with pytest.raises(ConfigError, match="missing coefficient"):
        parse_config('[equation]\na = "1"\n')
    cfg = parse_config(BASE)
    with pytest.raises(ConfigError, match="missing witness: eta"):
        cfg.witness("eta")
    with pytest.raises(ConfigError, match="reference equation #1"):
        cfg.reference(0)


def test_bad_witness_direction_and_solver():
    with pytest.raises(ConfigError, match="direction"):
        parse_config(BASE + '\n[witnesses]\ndirection = "up"\n')
    with pytest.raises(ConfigError, match="unknown solver option"):
        parse_config(BASE + "\n[solver]\nrtol = 1\n")
    with pytest.raises(ConfigError, match="invalid solver options"):
        parse_config(BASE + "\n[solver]\nrel_tol = -1\n")


def test_load_config_file(tmp_path):
    p = tmp_path / "eq.toml"
    p.write_text(BASE)
    assert load_config(p).source == str(p)
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config(tmp_path / "missing.toml")


@pytest.mark.parametrize("example_id", list(EXAMPLES))
def test_catalog_configs_parse(example_id):
    cfg = example_config(example_id)
    assert cfg.references


def test_unknown_example():
    with pytest.raises(KeyError):
        example_config("9.9")
