"""Run configuration: a flat ``key = value`` file with ``[section]`` headers.

::

    [grid]
    t_w = 5.5
    l = 10
    [scenario]
    name = S4

Blank lines and lines starting with ``#`` or ``;`` are ignored. Every error
carries the line number it was raised for.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace

from .kernel import KernelConfig
from .protocol import ScenarioScript, builtin_scenarios, parse_script
from .source import Quadrature, SourceParams


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class GridSection:
    t_w: float = 5.5
    l: float = 10.0
    n_t: int = 256
    n_z: int = 256
    n_inner: int = 128
    rank_tol: float = 1e-6


@dataclass(frozen=True)
class SourceSection:
    n_bar_tw: float = 1000.0
    mu: float = 0.1
    kappa_tw: float = 1e4
    squeezed_quadrature: str = "X"


@dataclass(frozen=True)
class ScenarioSection:
    name: str = "S1"
    script: str = ""


@dataclass(frozen=True)
class OracleSection:
    enabled: bool = False
    n_t: int = 512
    n_z: int = 512
    retrieval: str = "backward"
    mode: int = 1


@dataclass(frozen=True)
class OutputSection:
    directory: str = "out"
    formats: tuple[str, ...] = ("csv", "json")
    figures: bool = False


@dataclass(frozen=True)
class RunConfig:
    grid: GridSection = field(default_factory=GridSection)
    source: SourceSection = field(default_factory=SourceSection)
    scenario: ScenarioSection = field(default_factory=ScenarioSection)
    oracle: OracleSection = field(default_factory=OracleSection)
    output: OutputSection = field(default_factory=OutputSection)

    def kernel_config(self) -> KernelConfig:
        g = self.grid
        return KernelConfig(t_w=g.t_w, l=g.l, n_t=g.n_t, n_z=g.n_z, n_inner=g.n_inner)

    def source_params(self) -> SourceParams:
        s = self.source
        return SourceParams(s.n_bar_tw, s.mu, s.kappa_tw, Quadrature(s.squeezed_quadrature))

    def script(self) -> ScenarioScript:
        if self.scenario.name == "custom":
            return parse_script(self.scenario.script, name="custom")
        return builtin_scenarios()[self.scenario.name]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["output"]["formats"] = list(self.output.formats)
        return out


_SECTIONS = {
    "grid": GridSection,
    "source": SourceSection,
    "scenario": ScenarioSection,
    "oracle": OracleSection,
    "output": OutputSection,
}


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_int(text: str) -> int:
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _parse_float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"expected a finite number, got {text!r}")
    return value


def _parse_formats(text: str) -> tuple[str, ...]:
    items = tuple(dict.fromkeys(p.strip().lower() for p in text.replace(",", " ").split() if p.strip()))
    bad = [p for p in items if p not in ("csv", "json")]
    if bad or not items:
        raise ValueError(f"formats must be a non-empty subset of {{csv, json}}, got {text!r}")
    return items


_CONVERTERS = {"float": _parse_float, "int": _parse_int, "bool": _parse_bool, "str": str}


def _convert(section: str, key: str, text: str):
    if (section, key) == ("output", "formats"):
        return _parse_formats(text)
    kind = {f.name: f.type for f in fields(_SECTIONS[section])}[key]
    return _CONVERTERS[kind](text)


def _check(cfg: RunConfig, lines: dict) -> None:
    """Re-run the owning modules' validation, mapping failures to line numbers."""

    def fail(section, key, message):
        raise ConfigError(f"[{section}] {key}: {message}", lines.get((section, key)))

    g = cfg.grid
    for key in ("t_w", "l"):
        if getattr(g, key) <= 0:
            fail("grid", key, f"must be positive, got {getattr(g, key)}")
    for key in ("n_t", "n_z", "n_inner"):
        if getattr(g, key) < 8:
            fail("grid", key, f"must be >= 8, got {getattr(g, key)}")
    if not 0 < g.rank_tol < 1:
        fail("grid", "rank_tol", f"must lie in (0, 1), got {g.rank_tol}")

    s = cfg.source
    if s.n_bar_tw < 0:
        fail("source", "n_bar_tw", f"must be >= 0, got {s.n_bar_tw}")
    if not 0 < s.mu <= 1:
        fail("source", "mu", f"must lie in (0, 1], got {s.mu}")
    if s.kappa_tw <= 0:
        fail("source", "kappa_tw", f"must be positive, got {s.kappa_tw}")
    if s.squeezed_quadrature not in ("X", "Y"):
        fail("source", "squeezed_quadrature", f"must be X or Y, got {s.squeezed_quadrature!r}")

    sc = cfg.scenario
    if sc.name == "custom":
        if not sc.script.strip():
            fail("scenario", "script", "required when name = custom")
        try:
            parse_script(sc.script)
        except ValueError as exc:
            fail("scenario", "script", str(exc))
    elif sc.name not in builtin_scenarios():
        fail("scenario", "name", f"must be one of S1..S6 or custom, got {sc.name!r}")
    elif sc.script.strip():
        fail("scenario", "script", "only allowed when name = custom")

    o = cfg.oracle
    for key in ("n_t", "n_z"):
        if getattr(o, key) < 4:
            fail("oracle", key, f"must be >= 4, got {getattr(o, key)}")
    if o.retrieval not in ("backward", "forward"):
        fail("oracle", "retrieval", f"must be backward or forward, got {o.retrieval!r}")
    if o.mode < 1:
        fail("oracle", "mode", f"must be >= 1, got {o.mode}")
    if not cfg.output.directory.strip():
        fail("output", "directory", "must not be empty")


def parse_config(text: str) -> RunConfig:
    """Parse configuration text; omitted keys take their defaults."""
    values: dict[str, dict] = {name: {} for name in _SECTIONS}
    lines: dict[tuple[str, str], int] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", lineno)
            section = line[1:-1].strip().lower()
            if section not in _SECTIONS:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        if section is None:
            raise ConfigError("key outside of any [section]", lineno)
        key, _, value = line.partition("=")
        key, value = key.strip().lower(), value.strip()
        known = {f.name for f in fields(_SECTIONS[section])}
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)
        if (section, key) in lines:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno)
        if section == "source" and key == "squeezed_quadrature":
            value = value.upper()
        try:
            values[section][key] = _convert(section, key, value)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}", lineno) from None
        lines[(section, key)] = lineno
    cfg = RunConfig(**{name: cls(**values[name]) for name, cls in _SECTIONS.items()})
    _check(cfg, lines)
    return cfg


def replace_value(cfg: RunConfig, section: str, key: str, value) -> RunConfig:
    """Copy of ``cfg`` with one key changed (used by parameter sweeps)."""
    part = replace(getattr(cfg, section), **{key: value})
    new = replace(cfg, **{section: part})
    _check(new, {})
    return new
