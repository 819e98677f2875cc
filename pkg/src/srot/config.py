"""Run configuration: strict INI-style files mapped onto typed settings.

Reproducibility beats flexibility here, so parsing is strict: unknown
sections or keys abort before any computation, as do out-of-range values.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field

from srot.dynamical import DEFAULT_TOLERANCES
from srot.geodesics import ShootingConfig
from srot.manifolds import Manifold, by_name

__all__ = ["RunConfig", "ConfigError", "load_config", "parse_config", "default_config"]


class ConfigError(ValueError):
    """A configuration file is malformed or out of range."""


_SHOOTING_FIELDS = {f.name: f.type for f in dataclasses.fields(ShootingConfig)}
_SOLVER_KEYS = {"method", "epsilon", "anneal_factor", "max_iter"}
_RUN_KEYS = {"grid_steps", "seed", "threads"}
_MANIFOLD_KEYS = {"name", "dim"}


@dataclass(frozen=True)
class RunConfig:
    """Everything a pipeline run needs, resolved and validated."""

    manifold: Manifold
    shooting: ShootingConfig = field(default_factory=ShootingConfig)
    solver_method: str = "exact"
    epsilon: float = 1e-3
    anneal_factor: float = 0.5
    solver_max_iter: int = 2000
    grid_steps: int = 256
    seed: int = 0
    threads: int = 0
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))


def default_config(manifold_name: str = "heisenberg", dim: int | None = None) -> RunConfig:
    return RunConfig(manifold=by_name(manifold_name, dim))


def _convert(raw: str, target, where: str):
    try:
        if target is float:
            return float(raw)
        if target is int:
            return int(raw)
        if target is tuple:
            return tuple(float(v) for v in raw.split(","))
        return raw
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r}") from None


def parse_config(text: str) -> RunConfig:
    """Parse the INI grammar; reject unknown sections/keys and bad ranges."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc

    known = {"manifold", "shooting", "solver", "run", "tolerances"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise ConfigError(f"unknown section(s): {sorted(unknown)}")

    name = "heisenberg"
    dim = None
    if parser.has_section("manifold"):
        for key in parser["manifold"]:
            if key not in _MANIFOLD_KEYS:
                raise ConfigError(f"[manifold] unknown key {key!r}")
        name = parser["manifold"].get("name", "heisenberg")
        if "dim" in parser["manifold"]:
            dim = _convert(parser["manifold"]["dim"], int, "[manifold] dim")
    try:
        manifold = by_name(name, dim)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    shooting_kwargs = {}
    if parser.has_section("shooting"):
        for key, raw in parser["shooting"].items():
            if key not in _SHOOTING_FIELDS:
                raise ConfigError(f"[shooting] unknown key {key!r}")
            anno = str(_SHOOTING_FIELDS[key])
            if "tuple" in anno:
                target = tuple
            elif "int" in anno:
                target = int
            else:
                target = float
            shooting_kwargs[key] = _convert(raw, target, f"[shooting] {key}")
    try:
        shooting = ShootingConfig(**shooting_kwargs)
    except ValueError as exc:
        raise ConfigError(f"[shooting] {exc}") from exc

    method = "exact"
    epsilon = 1e-3
    anneal = 0.5
    max_iter = 2000
    if parser.has_section("solver"):
        for key in parser["solver"]:
            if key not in _SOLVER_KEYS:
                raise ConfigError(f"[solver] unknown key {key!r}")
        method = parser["solver"].get("method", "exact")
        if method not in ("exact", "entropic"):
            raise ConfigError(f"[solver] method must be exact or entropic, got {method!r}")
        if "epsilon" in parser["solver"]:
            epsilon = _convert(parser["solver"]["epsilon"], float, "[solver] epsilon")
            if epsilon <= 0:
                raise ConfigError("[solver] epsilon must be > 0")
        if "anneal_factor" in parser["solver"]:
            anneal = _convert(parser["solver"]["anneal_factor"], float, "[solver] anneal_factor")
            if not 0 < anneal < 1:
                raise ConfigError("[solver] anneal_factor must lie in (0, 1)")
        if "max_iter" in parser["solver"]:
            max_iter = _convert(parser["solver"]["max_iter"], int, "[solver] max_iter")

    grid_steps = shooting.steps
    seed = 0
    threads = 0
    if parser.has_section("run"):
        for key in parser["run"]:
            if key not in _RUN_KEYS:
                raise ConfigError(f"[run] unknown key {key!r}")
        if "grid_steps" in parser["run"]:
            grid_steps = _convert(parser["run"]["grid_steps"], int, "[run] grid_steps")
            if grid_steps < 8:
                raise ConfigError("[run] grid_steps must be >= 8")
            shooting = dataclasses.replace(shooting, steps=grid_steps)
        if "seed" in parser["run"]:
            seed = _convert(parser["run"]["seed"], int, "[run] seed")
        if "threads" in parser["run"]:
            threads = _convert(parser["run"]["threads"], int, "[run] threads")

    tolerances = dict(DEFAULT_TOLERANCES)
    if parser.has_section("tolerances"):
        for key, raw in parser["tolerances"].items():
            if key not in DEFAULT_TOLERANCES:
                raise ConfigError(f"[tolerances] unknown key {key!r}")
            value = _convert(raw, float, f"[tolerances] {key}")
            if value <= 0:
                raise ConfigError(f"[tolerances] {key} must be > 0")
            tolerances[key] = value

    return RunConfig(
        manifold=manifold,
        shooting=shooting,
        solver_method=method,
        epsilon=epsilon,
        anneal_factor=anneal,
        solver_max_iter=max_iter,
        grid_steps=grid_steps,
        seed=seed,
        threads=threads,
        tolerances=tolerances,
    )


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
