"""Line-oriented run configuration with unit-suffixed numbers.

Syntax::

    # comment
    [section]          # headers group keys for readability; names are not scoped
    key = value
    B = 2870 G         # converted to 287 mT
    powers = 31, 100, 200 mW

Internal units: MHz, mT, us, K, mW, ppm, rad.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

UNITS = {
    "Hz": ("frequency", 1e-6),
    "kHz": ("frequency", 1e-3),
    "MHz": ("frequency", 1.0),
    "GHz": ("frequency", 1e3),
    "mT": ("field", 1.0),
    "G": ("field", 0.1),
    "T": ("field", 1e3),
    "ns": ("time", 1e-3),
    "us": ("time", 1.0),
    "ms": ("time", 1e3),
    "s": ("time", 1e6),
    "K": ("temperature", 1.0),
    "mW": ("power", 1.0),
    "W": ("power", 1e3),
    "ppm": ("concentration", 1.0),
    "rad": ("angle", 1.0),
    "deg": ("angle", math.pi / 180),
}
CANONICAL = {"frequency": "MHz", "field": "mT", "time": "us", "temperature": "K",
             "power": "mW", "concentration": "ppm", "angle": "rad"}

_NUM = re.compile(r"^([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z]*)$")


class ConfigError(ValueError):
    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass(frozen=True)
class Param:
    """Schema entry: ``kind`` is a unit dimension, "number", "int", "str", "bool"
    or "list:<kind>"; ``choices`` restricts strings."""

    kind: str
    default: object = None
    choices: tuple = ()


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)  # key -> source line

    def get(self, key, default=None):
        return self.params.get(key, default)


def parse_raw(text: str):
    """``[(line_no, key, raw_value)]`` from config text."""
    entries = []
    seen = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ConfigError(f"malformed section header {raw.strip()!r}", no)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", no)
        key, value = (s.strip() for s in line.split("=", 1))
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", key):
            raise ConfigError("invalid key name", no, key)
        if key in seen:
            raise ConfigError(f"duplicate key (first set on line {seen[key]})", no, key)
        if value == "":
            raise ConfigError("missing value", no, key)
        seen[key] = no
        entries.append((no, key, value))
    return entries


def parse_number(text: str, kind: str, line=None, key=None) -> float:
    m = _NUM.match(text.strip())
    if not m:
        raise ConfigError(f"expected a number, got {text!r}", line, key)
    value, unit = float(m.group(1)), m.group(2)
    if kind in ("number", "int"):
        if unit:
            raise ConfigError(f"unexpected unit {unit!r} for a plain number", line, key)
        if kind == "int":
            if value != int(value):
                raise ConfigError(f"expected an integer, got {text!r}", line, key)
            return int(value)
        return value
    if not unit:
        return value
    if unit not in UNITS:
        raise ConfigError(f"unknown unit {unit!r}", line, key)
    dim, scale = UNITS[unit]
    if dim != kind:
        raise ConfigError(f"unit {unit!r} is a {dim}, expected a {kind}", line, key)
    return value * scale


def convert(value: str, spec: Param, line=None, key=None):
    kind = spec.kind
    if kind.startswith("list:"):
        inner = kind[5:]
        parts = [p.strip() for p in value.split(",")]
        if any(p == "" for p in parts):
            raise ConfigError("empty list element", line, key)
        # a trailing unit applies to every bare element: "31, 100, 200 mW"
        m = _NUM.match(parts[-1])
        unit = m.group(2) if m else ""
        out = []
        for p in parts:
            pm = _NUM.match(p)
            if pm and not pm.group(2) and unit:
                p = f"{p} {unit}"
            out.append(parse_number(p, inner, line, key))
        return tuple(out)
    if kind == "str":
        if spec.choices and value not in spec.choices:
            raise ConfigError(f"expected one of {', '.join(spec.choices)}, got {value!r}", line, key)
        return value
    if kind == "bool":
        low = value.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {value!r}", line, key)
    return parse_number(value, kind, line, key)


def parse_config(text: str, command: str, schema: dict) -> RunConfig:
    """Validate ``text`` against ``schema`` and fill defaults."""
    entries = parse_raw(text)
    params, lines = {}, {}
    for no, key, raw in entries:
        if key not in schema:
            raise ConfigError(f"unknown key for '{command}'", no, key)
        params[key] = convert(raw, schema[key], no, key)
        lines[key] = no
    for key, spec in schema.items():
        if key not in params:
            params[key] = spec.default
    return RunConfig(command, params, lines)


def format_value(value, spec: Param) -> str:
    kind = spec.kind
    if value is None:
        raise ValueError("cannot render an unset value")
    if kind.startswith("list:"):
        inner = kind[5:]
        unit = CANONICAL.get(inner, "")
        body = ", ".join(repr(float(v)) if inner != "int" else str(int(v)) for v in value)
        return f"{body} {unit}".rstrip()
    if kind == "str":
        return value
    if kind == "bool":
        return "true" if value else "false"
    if kind == "int":
        return str(int(value))
    if kind == "number":
        return repr(float(value))
    return f"{float(value)!r} {CANONICAL[kind]}"


def render(cfg: RunConfig, schema: dict) -> str:
    """Config text that parses back to ``cfg`` (unset optional keys are omitted)."""
    out = [f"[{cfg.command}]"]
    for key, spec in schema.items():
        value = cfg.params.get(key)
        if value is None:
            continue
        out.append(f"{key} = {format_value(value, spec)}")
    return "\n".join(out) + "\n"
