"""Experiment configuration.

One TOML file describes an experiment: sections mirror the module config
surfaces ([sampling], [rollout], [costs], [policy], [controller], [chain],
[world], [target]) plus a top-level seed. Any key can be overridden on the
command line as --section.key=value; unknown keys fail loudly with the key
name. The effective config can be serialized back out, and re-running a
serialized config reproduces the episode bit for bit.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError


@dataclass
class SamplingSection:
    generator: str = "halton"
    mode: str = "bspline"
    degree: int = 3
    knots: int = 0  # 0 = derive from horizon
    null_count: int = 2
    comb_coeffs: list = field(default_factory=lambda: [0.3, 0.4, 0.3])


@dataclass
class RolloutSection:
    horizon: int = 30
    particles: int = 200
    dt_base: float = 0.05
    dt_ramp: str = "two_phase"
    gamma: float = 0.99
    workers: int = 1
    terminal_weight: float = 1.0


@dataclass
class CostsSection:
    alpha_p: list = field(default_factory=lambda: [150.0, 20.0])
    alpha_s: float = 50.0
    alpha_j: float = 100.0
    alpha_m: float = 30.0
    alpha_c: float = 1000.0
    k_jl: float = 0.1
    k_m: float = 0.05
    collision_provider: str = "oracle"
    surrogate_path: str = ""


@dataclass
class PolicySection:
    beta: float = 0.5
    alpha_mu: float = 0.9
    alpha_sigma: float = 0.5
    sigma0: float = 1.0  # initial variance
    sigma_min: float = 1e-4  # variance floor
    sigma_max: float = 0.0  # 0 = clamp at sigma0
    mode: str = "per_joint_diagonal"
    command_mode: str = "mean"
    iterations: int = 1


@dataclass
class ControllerSection:
    control_period: float = 0.05
    latency_budget: float = 0.05
    filter_lambda: float = 0.3


@dataclass
class ChainSection:
    file: str = "planar2.chain"


@dataclass
class WorldSection:
    file: str = ""  # empty = no obstacles
    noise_sigma: float = 0.0


@dataclass
class TargetSection:
    position: list = field(default_factory=lambda: [1.5, 0.5])
    rpy: list = field(default_factory=list)  # goal orientation, [] = identity
    mode: str = "position_only"
    # optional moving target: rows [time, x, y(, z)]; overrides position
    waypoints: list = field(default_factory=list)
    interpolation: str = "hold"
    start: list = field(default_factory=list)  # initial joint vector, [] = zeros


_SECTIONS = {
    "sampling": SamplingSection,
    "rollout": RolloutSection,
    "costs": CostsSection,
    "policy": PolicySection,
    "controller": ControllerSection,
    "chain": ChainSection,
    "world": WorldSection,
    "target": TargetSection,
}


@dataclass
class ExperimentConfig:
    sampling: SamplingSection = field(default_factory=SamplingSection)
    rollout: RolloutSection = field(default_factory=RolloutSection)
    costs: CostsSection = field(default_factory=CostsSection)
    policy: PolicySection = field(default_factory=PolicySection)
    controller: ControllerSection = field(default_factory=ControllerSection)
    chain: ChainSection = field(default_factory=ChainSection)
    world: WorldSection = field(default_factory=WorldSection)
    target: TargetSection = field(default_factory=TargetSection)
    seed: int = 0


def _build_section(name: str, cls, data: dict):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    for key in data:
        if key not in fields:
            raise ConfigError(f"unknown config key [{name}] {key}")
    return cls(**data)


def config_from_dict(data: dict) -> ExperimentConfig:
    known = set(_SECTIONS) | {"seed"}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown config section or key: {key}")
    sections = {
        name: _build_section(name, cls, data.get(name, {}))
        for name, cls in _SECTIONS.items()
    }
    return ExperimentConfig(**sections, seed=int(data.get("seed", 0)))


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(p, "rb") as fh:
        data = tomllib.load(fh)
    return config_from_dict(data)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize config value {v!r}")


def dump_config(cfg: ExperimentConfig, path=None) -> str:
    """Render the effective config as TOML. load(dump(cfg)) == cfg."""
    lines = [f"seed = {cfg.seed}", ""]
    for name in _SECTIONS:
        section = getattr(cfg, name)
        lines.append(f"[{name}]")
        for f in dataclasses.fields(section):
            lines.append(f"{f.name} = {_toml_value(getattr(section, f.name))}")
        lines.append("")
    text = "\n".join(lines)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def apply_overrides(cfg: ExperimentConfig, overrides: list) -> ExperimentConfig:
    """Apply --section.key=value strings. Values are parsed as TOML scalars
    (falling back to bare strings), so lists and booleans work too."""
    for item in overrides:
        spec = item.lstrip("-")
        if "=" not in spec:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        key_path, raw = spec.split("=", 1)
        if key_path == "seed":
            cfg.seed = int(raw)
            continue
        if "." not in key_path:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        section_name, key = key_path.split(".", 1)
        if section_name not in _SECTIONS:
            raise ConfigError(f"unknown config section {section_name!r}")
        section = getattr(cfg, section_name)
        fields = {f.name for f in dataclasses.fields(section)}
        if key not in fields:
            raise ConfigError(f"unknown config key [{section_name}] {key}")
        try:
            value = tomllib.loads(f"v = {raw}")["v"]
        except tomllib.TOMLDecodeError:
            value = raw
        current = getattr(section, key)
        if isinstance(current, int) and not isinstance(current, bool) and isinstance(value, float):
            value = int(value)
        setattr(section, key, value)
    return cfg
