"""Experiment configuration files.

INI-style text with three sections; every key is optional except
``geometry.trap``::

    [geometry]
    d = 1                        # cross-section width
    trap = rect 0.5 0 0.5 0.5    # rect CX CY W H | polygon X1 Y1 X2 Y2 ... |
                                 # regular CX CY R N [ROT] | none
    a = 1                        # limit coupling a
    coupling_rule = linear       # linear | power | affine
    coupling_coefficient = 1     # power:  a_eps = coefficient * eps**power
    coupling_power = 1
    coupling_b = 0               # affine: a_eps = a * eps * (1 + b * eps)
    margin = 1/64                # default: numerics.h

    [numerics]
    h = 1/64
    phi_count = 17
    k_max = 5
    tol = 1e-9
    dense_limit = 3000
    richardson = true
    seed = 12345

    [study]
    epsilons = 0.4, 0.2, 0.1, 0.05
    L = 20
    output_dir = results         # overridden by $TRAPGAP_OUTPUT_DIR
    coupling_rtol = 0.5

Numbers accept simple fractions and ``pi`` (``1/64``, ``pi/2``).  Unknown
sections or keys are errors; every error carries a line and column.
"""

from __future__ import annotations

import configparser
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .eigen import DENSE_LIMIT, DEFAULT_SEED, DEFAULT_TOL
from .geometry import (CellGeometry, GeometryError, affine_rule, linear_rule, power_rule, rectangle,
                       regular_polygon)

OUTPUT_ENV = "TRAPGAP_OUTPUT_DIR"

_SCHEMA = {
    "geometry": {"d", "trap", "a", "coupling_rule", "coupling_coefficient", "coupling_power", "coupling_b",
                 "margin"},
    "numerics": {"h", "phi_count", "k_max", "tol", "dense_limit", "richardson", "seed"},
    "study": {"epsilons", "l", "output_dir", "coupling_rtol"},
}
_NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*(?:[eE][-+]?\d+)?|pi))\s*(?:/\s*(\d+\.?\d*(?:[eE][-+]?\d+)?|pi))?\s*$")
_KEY_LINE = re.compile(r"^(\s*)([^=:\s][^=:]*?)\s*[=:]\s*")


class ConfigError(ValueError):
    """Configuration problem at ``line``/``column`` (1-based; 0 when unknown)."""

    def __init__(self, message: str, line: int = 0, column: int = 0, path: str = "<config>"):
        self.line, self.column, self.path = line, column, path
        super().__init__(f"{path}:{line}:{column}: {message}")


def parse_number(text: str) -> float:
    m = _NUMBER.match(text)
    if not m:
        raise ValueError(f"not a number: {text!r}")

    def val(s):
        return math.pi if s == "pi" else (-math.pi if s == "-pi" else float(s))

    num = val(m.group(1))
    return num / val(m.group(2)) if m.group(2) else num


@dataclass(frozen=True)
class ExperimentConfig:
    geometry: CellGeometry
    h: float = 1 / 64
    phi_count: int = 17
    k_max: int = 5
    tol: float = DEFAULT_TOL
    dense_limit: int = DENSE_LIMIT
    richardson: bool = True
    seed: int = DEFAULT_SEED
    epsilons: tuple = (0.4, 0.2, 0.1, 0.05)
    L: float = 20.0
    output_dir: Path = Path("results")
    coupling_rtol: float = 0.5
    source: Optional[str] = field(default=None, compare=False)

    @property
    def solver(self) -> dict:
        return {"dense_limit": self.dense_limit, "seed": self.seed}


class _Locator:
    """Maps ``(section, key)`` to the line and value column in the raw text."""

    def __init__(self, text: str):
        self.where: dict = {}
        self.sections: dict = {}
        section = None
        for lineno, line in enumerate(text.splitlines(), 1):
            stripped = line.strip()
            if not stripped or stripped[0] in "#;":
                continue
            if stripped.startswith("[") and stripped.endswith("]"):
                section = stripped[1:-1].strip()
                self.sections.setdefault(section, (lineno, line.index("[") + 1))
                continue
            m = _KEY_LINE.match(line)
            if m and section is not None and not line[:1].isspace():
                self.where[(section, m.group(2).strip().lower())] = (lineno, m.end() + 1)

    def __call__(self, section, key=None):
        if key is None:
            return self.sections.get(section, (0, 0))
        return self.where.get((section, key), self.sections.get(section, (0, 0)))


def _parse_trap(text: str):
    parts = text.split()
    if not parts:
        raise ValueError("empty trap specification")
    kind, args = parts[0].lower(), parts[1:]
    if kind == "none":
        if args:
            raise ValueError("'none' takes no arguments")
        return None
    nums = [parse_number(a) for a in args]
    if kind == "rect":
        if len(nums) != 4:
            raise ValueError("rect needs CX CY W H")
        if nums[2] <= 0 or nums[3] <= 0:
            raise ValueError("rect width and height must be positive")
        return rectangle(*nums)
    if kind == "polygon":
        if len(nums) < 6 or len(nums) % 2:
            raise ValueError("polygon needs at least three X Y pairs")
        return [nums[i:i + 2] for i in range(0, len(nums), 2)]
    if kind == "regular":
        if len(nums) not in (4, 5) or nums[3] != int(nums[3]) or nums[3] < 3:
            raise ValueError("regular needs CX CY R N [ROT] with integer N >= 3")
        return regular_polygon(nums[0], nums[1], nums[2], int(nums[3]), nums[4] if len(nums) == 5 else 0.0)
    raise ValueError(f"unknown trap kind {kind!r} (rect, polygon, regular, none)")


def parse_config(text: str, path: str = "<config>", env: Optional[dict] = None) -> ExperimentConfig:
    env = os.environ if env is None else env
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None,
                                       default_section="__none__")
    try:
        parser.read_string(text, source=path)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside any section", exc.lineno, 1, path) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(exc.message.split(": ", 1)[-1], exc.lineno or 0, 1, path) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"cannot parse line {line.strip()!r}", lineno, 1, path) from None
    loc = _Locator(text)

    def fail(msg, section, key=None):
        raise ConfigError(msg, *loc(section, key), path)

    for section in parser.sections():
        if section not in _SCHEMA:
            fail(f"unknown section [{section}]", section)
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                fail(f"unknown key {key!r} in [{section}]", section, key)

    def get(section, key, conv, default):
        if not parser.has_option(section, key):
            return default
        raw = parser[section][key]
        try:
            return conv(raw)
        except (ValueError, TypeError) as exc:
            fail(f"bad value for {section}.{key}: {exc}", section, key)

    def integer(s):
        v = parse_number(s)
        if v != int(v):
            raise ValueError(f"expected an integer, got {s!r}")
        return int(v)

    def boolean(s):
        low = s.strip().lower()
        if low not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
            raise ValueError(f"expected a boolean, got {s!r}")
        return low in ("true", "yes", "1", "on")

    def number_list(s):
        vals = [parse_number(p) for p in s.replace(",", " ").split()]
        if not vals:
            raise ValueError("empty list")
        return tuple(vals)

    # numerics first: the geometry margin defaults to h
    h = get("numerics", "h", parse_number, 1 / 64)
    if not h > 0:
        fail("h must be positive", "numerics", "h")
    phi_count = get("numerics", "phi_count", integer, 17)
    if phi_count < 2:
        fail("phi_count must be at least 2", "numerics", "phi_count")
    k_max = get("numerics", "k_max", integer, 5)
    if k_max < 2:
        fail("k_max must be at least 2", "numerics", "k_max")
    tol = get("numerics", "tol", parse_number, DEFAULT_TOL)
    if not tol > 0:
        fail("tol must be positive", "numerics", "tol")
    dense_limit = get("numerics", "dense_limit", integer, DENSE_LIMIT)
    if dense_limit < 0:
        fail("dense_limit must be nonnegative", "numerics", "dense_limit")
    richardson = get("numerics", "richardson", boolean, True)
    seed = get("numerics", "seed", integer, DEFAULT_SEED)

    if not parser.has_option("geometry", "trap"):
        fail("geometry.trap is required (use 'none' for a trap-free cell)", "geometry")
    trap = get("geometry", "trap", _parse_trap, None)
    d = get("geometry", "d", parse_number, 1.0)
    a = get("geometry", "a", parse_number, 1.0)
    if a < 0:
        fail("coupling a must be nonnegative", "geometry", "a")
    margin = get("geometry", "margin", parse_number, h)
    rule_name = get("geometry", "coupling_rule", lambda s: s.strip().lower(), "linear")
    if rule_name == "linear":
        rule = linear_rule(a)
    elif rule_name == "power":
        rule = power_rule(get("geometry", "coupling_coefficient", parse_number, a),
                          get("geometry", "coupling_power", parse_number, 1.0))
    elif rule_name == "affine":
        rule = affine_rule(a, get("geometry", "coupling_b", parse_number, 0.0))
    else:
        fail(f"unknown coupling rule {rule_name!r} (linear, power, affine)", "geometry", "coupling_rule")
    try:
        geom = CellGeometry(d, trap, 1.0, a, rule, margin)
    except GeometryError as exc:
        key = "trap" if parser.has_option("geometry", "trap") else "d"
        fail(str(exc), "geometry", key)

    epsilons = get("study", "epsilons", number_list, (0.4, 0.2, 0.1, 0.05))
    if any(e <= 0 for e in epsilons):
        fail("epsilons must be positive", "study", "epsilons")
    if any(b >= a_ for a_, b in zip(epsilons, epsilons[1:])):
        fail("epsilons must be strictly decreasing", "study", "epsilons")
    L = get("study", "l", parse_number, 20.0)
    if not L > 0:
        fail("L must be positive", "study", "l")
    coupling_rtol = get("study", "coupling_rtol", parse_number, 0.5)
    if a > 0 and not geom.coupling_rule_consistent(epsilons, coupling_rtol):
        fail(f"coupling rule does not satisfy a_eps/eps ~ a within {coupling_rtol} on the epsilon list",
             "geometry", "coupling_rule")
    out = env.get(OUTPUT_ENV) or get("study", "output_dir", lambda s: s.strip(), "results")

    return ExperimentConfig(geom, h, phi_count, k_max, tol, dense_limit, richardson, seed, tuple(epsilons),
                            L, Path(out), coupling_rtol, path)


def load_config(path, env: Optional[dict] = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", 0, 0, str(path)) from None
    return parse_config(text, str(path), env)
