"""Run configuration: dataclasses, INI file loading, and CLI overrides.

The config file is plain-text INI with one section per module; every key can
also be overridden on the command line as ``--section.key=value``.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from typing import Optional

from .assignment import AssignmentParams
from .errors import ConfigurationError
from .gate import SurrogateWeights


@dataclass
class GateConfig:
    tau_high: float = 0.7
    tau_low: float = 0.3
    dwell: int = 3
    window: int = 8
    update_every: int = 4
    lr: float = 0.05
    l2: float = 1e-3
    margin: float = 0.5
    cov_weight: float = 1.0
    dist_weight: float = 0.5
    risk_weight: float = 2.0
    stall_weight: float = 1.0
    initial_switch: int = 1

    def surrogate_weights(self) -> SurrogateWeights:
        return SurrogateWeights(
            cov=self.cov_weight,
            dist=self.dist_weight,
            risk=self.risk_weight,
            stall=self.stall_weight,
        )


@dataclass
class ExecutionConfig:
    recovery_len: int = 4
    osc_threshold: int = 3


@dataclass
class MetricsConfig:
    alpha: float = 1.0
    lambda_omega: float = 0.1
    strict_contact: bool = False


@dataclass
class ScenarioConfig:
    width: int = 40
    height: int = 40
    n_robots: int = 4
    p_occ: float = 0.30
    n_dynamic: int = 32
    nu: float = 0.5
    sense_radius: int = 3
    interact_radius: int = 3
    horizon: Optional[int] = None
    seed: int = 0

    def effective_horizon(self) -> int:
        """Horizon scales with map size when not pinned explicitly."""
        return self.horizon if self.horizon is not None else 8 * (self.width + self.height)


@dataclass
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    assignment: AssignmentParams = field(default_factory=AssignmentParams)
    gate: GateConfig = field(default_factory=GateConfig)
    execution: ExecutionConfig = field(default_factory=ExecutionConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)

    def __post_init__(self) -> None:
        # The assignment interaction radius follows the scenario unless the
        # caller set it apart explicitly.
        self.assignment.interact_radius = self.scenario.interact_radius

    def validate(self) -> None:
        s = self.scenario
        if s.width < 1 or s.height < 1:
            raise ConfigurationError("map dimensions must be >= 1")
        if s.n_robots < 1:
            raise ConfigurationError("need at least one robot")
        if not (0.0 <= s.p_occ < 1.0):
            raise ConfigurationError("p_occ must be in [0, 1)")
        if s.n_dynamic < 0:
            raise ConfigurationError("n_dynamic must be >= 0")
        if not (0.0 < s.nu < 1.0):
            raise ConfigurationError("nu must be in (0, 1)")
        if s.sense_radius < 1:
            raise ConfigurationError("sense_radius must be >= 1")
        if not self.gate.tau_high > self.gate.tau_low:
            raise ConfigurationError("tau_high must exceed tau_low")
        if not self.metrics.alpha > self.metrics.lambda_omega >= 0:
            raise ConfigurationError("metrics require alpha > lambda_omega >= 0")


_SECTIONS = {
    "scenario": "scenario",
    "assignment": "assignment",
    "gate": "gate",
    "execution": "execution",
    "metrics": "metrics",
}


def _coerce(value: str, target_type: type) -> object:
    if target_type is bool:
        low = value.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigurationError(f"cannot parse boolean from {value!r}")
    if target_type is int:
        return int(value)
    if target_type is float:
        return float(value)
    return value


def _set_key(config: RunConfig, section: str, key: str, raw: str) -> None:
    if section not in _SECTIONS:
        raise ConfigurationError(f"unknown config section {section!r}")
    target = getattr(config, _SECTIONS[section])
    fields = {f.name: f for f in dataclasses.fields(target)}
    if key not in fields:
        raise ConfigurationError(f"unknown key {key!r} in section [{section}]")
    current = getattr(target, key)
    if key == "horizon" and raw.strip().lower() in ("none", "auto", ""):
        setattr(target, key, None)
        return
    target_type = type(current) if current is not None else int
    setattr(target, key, _coerce(raw, target_type))


def load_config(path: str, base: Optional[RunConfig] = None) -> RunConfig:
    config = base if base is not None else RunConfig()
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigurationError(f"cannot read config file {path!r}")
    for section in parser.sections():
        for key, raw in parser.items(section):
            _set_key(config, section, key, raw)
    config.__post_init__()
    return config


def apply_overrides(config: RunConfig, overrides: list[str]) -> RunConfig:
    """Apply ``section.key=value`` strings (the CLI override syntax)."""
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not of the form section.key=value")
        dotted, raw = item.split("=", 1)
        if "." not in dotted:
            raise ConfigurationError(f"override key {dotted!r} must be section.key")
        section, key = dotted.split(".", 1)
        _set_key(config, section.strip(), key.strip(), raw.strip())
    config.__post_init__()
    return config
