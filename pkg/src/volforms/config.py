"""Run configuration: an INI file with sections [grid], [solver], [boundary], [experiment].

Example::

    [grid]
    dim = 1
    n = 32
    nt = 33

    [solver]
    epsilon = 1.0
    s_steps = 10

    [boundary]
    # one mode per line: k1 .. kd amplitude phase
    phi0 =
        1 0.0076 0.0
    phi1 =
        2 -0.0012 0.0
    # or: phi0_file = start.f64  (with start.meta.json next to it)

    [experiment]
    seed = 42
    samples = 100000
    lambdas = 0, 0.25, 0.5, 0.75, 1
    eps_schedule = 1, 0.5, 0.25
    output = runs/demo

A mode with k = 0 is the constant ``amplitude * cos(phase)``.
Unknown sections or keys are rejected; every error names the line.
"""
from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .fieldio import read_field
from .grid import BoundaryPair, TorusGrid, laplacian_bound, make_grid, trig_field
from .solver import SolverConfig

SECTIONS = ("grid", "solver", "boundary", "experiment")
_GRID_KEYS = {"dim": int, "n": int, "nt": int}
_BOUNDARY_KEYS = ("phi0", "phi1", "phi0_file", "phi1_file", "margin")
_EXPERIMENT_KEYS = {
    "seed": int, "samples": int, "lambdas": "floats", "eps_schedule": "floats",
    "eps": float, "c_slack": float, "pairs": int, "triples": int, "families": int,
    "suite": str, "output": str,
}


def _solver_types():
    defaults = SolverConfig()
    out = {}
    for f in dataclasses.fields(SolverConfig):
        val = getattr(defaults, f.name)
        out[f.name] = "floats" if isinstance(val, list) else type(val)
    return out


@dataclass
class BoundarySpec:
    """Either trig modes or a field file for each end."""

    phi0_modes: list | None = None
    phi1_modes: list | None = None
    phi0_file: str | None = None
    phi1_file: str | None = None
    margin: float = 1e-8

    @property
    def present(self) -> bool:
        return ((self.phi0_modes is not None or self.phi0_file is not None)
                and (self.phi1_modes is not None or self.phi1_file is not None))


@dataclass
class RunConfig:
    grid: TorusGrid = field(default_factory=lambda: make_grid(1, 32, 33))
    solver: SolverConfig = field(default_factory=SolverConfig)
    boundary: BoundarySpec = field(default_factory=BoundarySpec)
    seed: int = 42
    samples: int = 100_000
    lambdas: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    eps: float = 2.0**-6
    c_slack: float = 10.0
    pairs: int = 10
    triples: int = 10
    families: int = 3
    suite: str | None = None
    output: str | None = None
    text: str = ""  # verbatim source, echoed into run directories
    base_dir: Path = field(default_factory=Path.cwd)

    def boundary_pair(self) -> BoundaryPair:
        b = self.boundary
        if not b.present:
            raise ConfigurationError("[boundary] needs phi0 (or phi0_file) and phi1 (or phi1_file)")
        ends = [self._end(b.phi0_modes, b.phi0_file, "phi0"),
                self._end(b.phi1_modes, b.phi1_file, "phi1")]
        return BoundaryPair(ends[0], ends[1], self.grid, b.margin)

    def _end(self, modes, path, name):
        if modes is not None:
            return trig_field(self.grid, modes)
        values, meta = read_field(self.base_dir / path)
        if values.shape != self.grid.spatial_shape:
            raise ConfigurationError(
                f"{name}_file {path}: shape {values.shape} does not match grid "
                f"{self.grid.spatial_shape}")
        return values


def _line_index(text: str) -> dict:
    """Map (section, key) to the 1-based line where the key is defined."""
    index, section = {}, None
    for lineno, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            index[(section, None)] = lineno
            continue
        m = re.match(r"([^\s#;=:][^=:]*?)\s*[=:]", line)
        if m and section is not None and not line[:1].isspace():
            index[(section, m.group(1).strip().lower())] = lineno
    return index


class _Reader:
    def __init__(self, parser, index, source):
        self.parser, self.index, self.source = parser, index, source

    def where(self, section, key=None):
        line = self.index.get((section, key))
        loc = f"{self.source}:{line}" if line else self.source
        return f"{loc}: [{section}]" + (f" {key}" if key else "")

    def fail(self, section, key, msg):
        raise ConfigurationError(f"{self.where(section, key)}: {msg}")

    def convert(self, section, key, kind):
        raw = self.parser.get(section, key).strip()
        try:
            if kind == "floats":
                vals = [float(v) for v in re.split(r"[,\s]+", raw) if v]
                if not vals:
                    raise ValueError("empty list")
                return vals
            if kind is bool:
                return self.parser.getboolean(section, key)
            if kind is int:
                return int(raw)
            if kind is float:
                return float(raw)
            return raw
        except ValueError as exc:
            name = kind if isinstance(kind, str) else kind.__name__
            self.fail(section, key, f"expected {name}, got {raw!r} ({exc})")

    def keys(self, section, allowed):
        if not self.parser.has_section(section):
            return []
        keys = list(self.parser.options(section))
        for key in keys:
            if key not in allowed:
                self.fail(section, key, f"unknown key; allowed: {', '.join(sorted(allowed))}")
        return keys


def parse_modes(raw: str, dim: int, where: str = "modes") -> list:
    """Parse ``k1 .. kd amplitude phase`` lines (newline or ';' separated)."""
    modes = []
    for i, line in enumerate(re.split(r"[;\n]", raw), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != dim + 2:
            raise ConfigurationError(
                f"{where}: mode {i} {line!r} needs {dim} wave numbers, amplitude and phase")
        try:
            k = [float(p) for p in parts[:dim]]
            amp, phase = float(parts[dim]), float(parts[dim + 1])
        except ValueError as exc:
            raise ConfigurationError(f"{where}: mode {i} {line!r}: {exc}") from None
        if any(kk != int(kk) for kk in k):
            raise ConfigurationError(f"{where}: mode {i}: wave numbers must be integers")
        modes.append((tuple(int(kk) for kk in k), amp, phase))
    if not modes:
        raise ConfigurationError(f"{where}: no modes given")
    bound = laplacian_bound(modes)
    if bound >= 1.0:
        raise ConfigurationError(
            f"{where}: sup|lap phi| bound {bound:.6g} >= 1, field may leave the admissible set")
    return modes


def parse_config(text: str, source: str = "<config>", base_dir=None) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",),
                                       interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: {exc}") from None
    rd = _Reader(parser, _line_index(text), source)
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigurationError(
                f"{rd.where(section)}: unknown section; allowed: {', '.join(SECTIONS)}")

    cfg = RunConfig(text=text, base_dir=Path(base_dir) if base_dir else Path.cwd())

    grid_vals = {k: rd.convert("grid", k, _GRID_KEYS[k]) for k in rd.keys("grid", _GRID_KEYS)}
    if grid_vals:
        merged = {"dim": 1, "n": 32, "nt": 33, **grid_vals}
        try:
            cfg.grid = make_grid(merged["dim"], merged["n"], merged["nt"])
        except ConfigurationError as exc:
            rd.fail("grid", None, str(exc))

    solver_types = _solver_types()
    solver_vals = {k: rd.convert("solver", k, solver_types[k])
                   for k in rd.keys("solver", solver_types)}

    exp_keys = rd.keys("experiment", _EXPERIMENT_KEYS)
    for key in exp_keys:
        val = rd.convert("experiment", key, _EXPERIMENT_KEYS[key])
        if key == "eps_schedule":
            solver_vals["eps_schedule"] = val
        elif key == "lambdas":
            if any(not 0.0 <= v <= 1.0 for v in val):
                rd.fail("experiment", key, "lambdas must lie in [0, 1]")
            cfg.lambdas = tuple(val)
        else:
            setattr(cfg, key, val)
    for key in ("samples", "pairs", "triples", "families"):
        if getattr(cfg, key) < 1:
            rd.fail("experiment", key, "must be >= 1")
    for key in ("eps", "c_slack"):
        if not getattr(cfg, key) > 0:
            rd.fail("experiment", key, "must be positive")
    try:
        cfg.solver = SolverConfig(**solver_vals)
    except ConfigurationError as exc:
        rd.fail("solver", None, str(exc))

    b = BoundarySpec()
    for key in rd.keys("boundary", _BOUNDARY_KEYS):
        if key in ("phi0", "phi1"):
            setattr(b, f"{key}_modes",
                    parse_modes(parser.get("boundary", key), cfg.grid.dim, rd.where("boundary", key)))
        elif key == "margin":
            b.margin = rd.convert("boundary", key, float)
        else:
            setattr(b, key, rd.convert("boundary", key, str))
    for end in ("phi0", "phi1"):
        if getattr(b, f"{end}_modes") is not None and getattr(b, f"{end}_file") is not None:
            rd.fail("boundary", end, f"give either {end} or {end}_file, not both")
    cfg.boundary = b
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path), path.parent)


def field_from_spec(spec: str, grid: TorusGrid, base_dir=None) -> np.ndarray:
    """Spatial field from a CLI point spec.

    Accepted forms: a number (constant field), a field file path, or trig
    modes separated by ';' such as ``"1 0.01 0; 2 0.002 1.57"``.
    """
    spec = spec.strip()
    try:
        return np.full(grid.spatial_shape, float(spec))
    except ValueError:
        pass
    path = Path(base_dir or ".") / spec
    if path.exists():
        values, _ = read_field(path)
        if values.shape != grid.spatial_shape:
            raise ConfigurationError(f"{spec}: shape {values.shape} does not match the grid")
        return values
    return trig_field(grid, parse_modes(spec, grid.dim, f"point {spec!r}"))
