import math
from pathlib import Path

import pytest

from trapgap.config import OUTPUT_ENV, ConfigError, load_config, parse_config, parse_number

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_parse_number_forms():
    assert parse_number("1/64") == 1 / 64
    assert parse_number("pi/2") == math.pi / 2
    assert parse_number("-0.25") == -0.25
    assert parse_number("1e-9") == 1e-9
    with pytest.raises(ValueError):
        parse_number("one")


def test_shipped_configs_load():
    cfg = load_config(CONFIGS / "canonical.ini", env={})
    assert cfg.h == 1 / 64 and cfg.epsilons == (0.4, 0.2, 0.1, 0.05)
    assert cfg.geometry.trap.shape == (4, 2) and cfg.geometry.coupling_a == 1.0
    assert load_config(CONFIGS / "trap_free.ini", env={}).geometry.trap is None
    assert load_config(CONFIGS / "hexagon.ini", env={}).geometry.d == 2.0


def test_defaults_and_margin():
    cfg = parse_config("[geometry]\ntrap = rect 0.5 0 0.5 0.5\n[numerics]\nh = 1/8\n", env={})
    assert cfg.geometry.margin == 1 / 8 and cfg.phi_count == 17 and cfg.richardson
    assert cfg.output_dir == Path("results")


def test_env_overrides_output_dir():
    cfg = parse_config("[geometry]\ntrap = none\n[study]\noutput_dir = a\n", env={OUTPUT_ENV: "/tmp/elsewhere"})
    assert cfg.output_dir == Path("/tmp/elsewhere")


def _error(text):
    with pytest.raises(ConfigError) as info:
        parse_config(text, "x.ini", env={})
    return info.value


def test_unknown_key_location():
    e = _error("[geometry]\ntrap = none\nwidth = 2\n")
    assert (e.line, e.column) == (3, 9) and "width" in str(e)


def test_unknown_section():
    e = _error("[geometry]\ntrap = none\n[solver]\nx = 1\n")
    assert e.line == 3


def test_bad_value_location():
    e = _error("[geometry]\ntrap = none\n[numerics]\nphi_count = 2.5\n")
    assert (e.line, e.column) == (4, 13)


def test_missing_trap():
    assert "trap" in str(_error("[geometry]\nd = 1\n"))


@pytest.mark.parametrize("trap", ["rect 0.5 0", "polygon 0.2 0.1 0.3", "circle 1 2 3",
                                  "polygon 0.2 -0.2 0.8 0.2 0.8 -0.2 0.2 0.2", "rect 0.5 0 2 0.5"])
def test_malformed_traps(trap):
    assert _error(f"[geometry]\ntrap = {trap}\n").line == 2


def test_other_validation():
    _error("trap = none\n")
    _error("[geometry]\ntrap = none\ntrap = none\n")
    _error("[geometry]\ntrap = none\n[study]\nepsilons = 0.1, 0.2\n")
    _error("[geometry]\ntrap = none\n[numerics]\nrichardson = maybe\n")
    _error("[geometry]\ntrap = rect 0.5 0 0.5 0.5\ncoupling_rule = power\ncoupling_power = 2\n")
    _error("[geometry]\ntrap = none\ncoupling_rule = cubic\n")


def test_coupling_rules():
    cfg = parse_config("[geometry]\ntrap = rect 0.5 0 0.5 0.5\ncoupling_rule = affine\ncoupling_b = 0.5\n", env={})
    assert cfg.geometry.coupling(0.1) == pytest.approx(0.1 * 1.05)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")
