"""Run configuration: flat ``key = value`` text with ``#`` comments.

Recognized keys and defaults are listed in :data:`DEFAULTS`.  Unknown keys,
malformed values and violated invariants raise :class:`ConfigError` naming the
offending key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .dynamics import FluidParams, GalerkinIndices
from .spectral import Grid
from .stepping import STEPPERS, SchemeConfig

__all__ = ["ConfigError", "RunConfig", "InitialCondition", "OutputConfig", "DEFAULTS", "PRESETS",
           "parse_config", "format_config"]

PRESETS = ("equilibrium", "uniform", "taylor_green", "perturbed")

DEFAULTS: dict[str, object] = {
    "grid.N": 32,
    "grid.L": 2.0 * math.pi,
    "params.rho": 1.0,
    "params.nu": 0.05,
    "params.nu1": 1.0,
    "params.mu": 1.0,
    "params.sigma": 0.02,
    "indices.n_v": 10,
    "indices.l_b": 10,
    "indices.n_cut": 10.0,
    "scheme.stepper": "explicit_rk4",
    "scheme.dt": 1e-3,
    "scheme.t_end": 1.0,
    "scheme.newton_tol": 1e-10,
    "scheme.newton_max_iter": 20,
    "scheme.mass_solve_tol": 1e-12,
    "scheme.budget_rtol": 1e-4,
    "ic.preset": "equilibrium",
    "ic.b0": 1.0,
    "ic.amplitude": 1.0,
    "ic.b_amp": 0.2,
    "ic.v_amp": 0.2,
    "ic.k_max": 3,
    "ic.seed": 0,
    "output.dir": "vbflow_out",
    "output.ledger_every": 1,
    "output.snapshot_every": 0,
}

_INT_KEYS = {"grid.N", "indices.n_v", "indices.l_b", "scheme.newton_max_iter", "ic.k_max", "ic.seed",
             "output.ledger_every", "output.snapshot_every"}
_STR_KEYS = {"scheme.stepper", "ic.preset", "output.dir"}


class ConfigError(ValueError):
    """Invalid configuration; the message names the key."""


@dataclass(frozen=True)
class InitialCondition:
    preset: str = "equilibrium"
    b0: float = 1.0
    amplitude: float = 1.0
    b_amp: float = 0.2
    v_amp: float = 0.2
    k_max: int = 3
    seed: int = 0


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "vbflow_out"
    ledger_every: int = 1
    snapshot_every: int = 0


@dataclass(frozen=True)
class RunConfig:
    grid: Grid
    params: FluidParams
    indices: GalerkinIndices
    scheme: SchemeConfig
    ic: InitialCondition = field(default_factory=InitialCondition)
    output: OutputConfig = field(default_factory=OutputConfig)
    budget_rtol: float = 1e-4

    def flat(self) -> dict[str, object]:
        """Every key with its effective value, in :data:`DEFAULTS` order."""
        src = {
            "grid": self.grid, "params": self.params, "indices": self.indices,
            "scheme": self.scheme, "ic": self.ic, "output": self.output,
        }
        out = {}
        for key in DEFAULTS:
            section, name = key.split(".")
            out[key] = self.budget_rtol if key == "scheme.budget_rtol" else getattr(src[section], name)
        return out

    def replace(self, updates: dict) -> "RunConfig":
        """New validated config with some flat keys changed, e.g. ``{"grid.N": 64}``."""
        values = self.flat()
        values.update(updates)
        return build_config(values)


def _coerce(key: str, raw: str):
    raw = raw.strip()
    if key in _STR_KEYS:
        if not raw:
            raise ConfigError(f"{key}: empty value")
        return raw
    try:
        if key in _INT_KEYS:
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        value = float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as a {'integer' if key in _INT_KEYS else 'number'}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{key}: value must be finite, got {raw!r}")
    return value


def parse_config(text: str) -> RunConfig:
    """Parse and validate configuration text."""
    values = dict(DEFAULTS)
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key {key!r} (line {lineno})")
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (line {lineno})")
        seen.add(key)
        values[key] = _coerce(key, raw)
    return build_config(values)


def build_config(values: dict) -> RunConfig:
    """Validate a complete flat mapping and assemble the typed config."""
    for key in values:
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key {key!r}")
    v = dict(DEFAULTS)
    v.update(values)

    def section(prefix, ctor, keys):
        try:
            return ctor(**{k: v[f"{prefix}.{k}"] for k in keys})
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            msg = str(exc)
            name = next((k for k in keys if msg.startswith(k + " ")), None)
            where = f"{prefix}.{name}" if name else prefix
            raise ConfigError(f"{where}: {msg}") from None

    grid = section("grid", Grid, ("N", "L"))
    params = section("params", FluidParams, ("rho", "nu", "nu1", "mu", "sigma"))
    indices = section("indices", GalerkinIndices, ("n_v", "l_b", "n_cut"))
    try:
        indices.check_grid(grid)
    except ValueError as exc:
        raise ConfigError(f"indices: {exc}") from None
    if v["scheme.stepper"] not in STEPPERS:
        raise ConfigError(f"scheme.stepper must be one of {STEPPERS}, got {v['scheme.stepper']!r}")
    scheme = section("scheme", SchemeConfig,
                     ("dt", "t_end", "stepper", "newton_tol", "newton_max_iter", "mass_solve_tol"))
    if not v["scheme.budget_rtol"] > 0:
        raise ConfigError(f"scheme.budget_rtol must be positive, got {v['scheme.budget_rtol']!r}")
    if v["ic.preset"] not in PRESETS:
        raise ConfigError(f"ic.preset must be one of {PRESETS}, got {v['ic.preset']!r}")
    ic = InitialCondition(*(v[f"ic.{k}"] for k in ("preset", "b0", "amplitude", "b_amp", "v_amp", "k_max", "seed")))
    if ic.preset in ("uniform", "taylor_green") and not ic.b0 > 0:
        raise ConfigError(f"ic.b0 must be strictly positive (initial b bounded away from zero), got {ic.b0!r}")
    if ic.preset == "perturbed":
        if not 0 <= ic.b_amp < 1:
            raise ConfigError(f"ic.b_amp must lie in [0, 1) so that b0 >= 1 - b_amp > 0, got {ic.b_amp!r}")
        if ic.v_amp < 0:
            raise ConfigError(f"ic.v_amp must be nonnegative, got {ic.v_amp!r}")
        if not 1 <= ic.k_max <= min(indices.n_v, indices.l_b):
            raise ConfigError(f"ic.k_max must lie in [1, min(n_v, l_b)] = [1, {min(indices.n_v, indices.l_b)}], "
                              f"got {ic.k_max!r}")
    output = OutputConfig(v["output.dir"], v["output.ledger_every"], v["output.snapshot_every"])
    if output.ledger_every < 1:
        raise ConfigError(f"output.ledger_every must be >= 1, got {output.ledger_every}")
    if output.snapshot_every < 0:
        raise ConfigError(f"output.snapshot_every must be >= 0, got {output.snapshot_every}")
    cfg = RunConfig(grid, params, indices, scheme, ic, output, float(v["scheme.budget_rtol"]))
    _check_cutoff_admissible(cfg)
    return cfg


def _check_cutoff_admissible(cfg: RunConfig) -> None:
    from .initial import make_initial_condition

    try:
        state = make_initial_condition(cfg.ic, cfg.grid, cfg.indices)
    except ValueError as exc:
        raise ConfigError(f"ic: {exc}") from None
    from .diagnostics import barrier_bounds

    bounds = barrier_bounds(state.b)
    if not bounds.admits(cfg.indices.n_cut):
        raise ConfigError(
            f"indices.n_cut={cfg.indices.n_cut:g} must exceed b_max={bounds.b_max:.6g} and "
            f"1/b_min={1.0 / bounds.b_min:.6g} of the initial data"
        )


def format_config(cfg: RunConfig) -> str:
    """Inverse of :func:`parse_config` (numbers written with ``repr``)."""
    lines = []
    for key, value in cfg.flat().items():
        lines.append(f"{key} = {value!r}" if not isinstance(value, str) else f"{key} = {value}")
    return "\n".join(lines) + "\n"
