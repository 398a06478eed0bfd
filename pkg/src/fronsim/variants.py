"""Experiment variants: which coupling links and execution branches run.

Families
--------
full     fidelity-coupled assignment + hysteresis-gated arbitration
base     both links off: decoupled weights, planner-first execution with a
         reactive fallback only on infeasible steps
ca       coupled assignment only (execution as in base)
cp       gated arbitration only (assignment weights as in base)
astar    planner-only execution: infeasible steps hold position (safe no-op)
rl       reactive-only execution (the switch is pinned to 0)

Each family combines with an allocator (coupled, greedy, hungarian, auction)
and a gate mode (cold/warm initialisation x static/adaptive updates).
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Optional

from .errors import ConfigurationError

ARBITRATION_GATED = "gated"
ARBITRATION_PLANNER = "planner"
ARBITRATION_PLANNER_STRICT = "planner_strict"
ARBITRATION_REACTIVE = "reactive"

_FAMILIES = {
    "full": (ARBITRATION_GATED, True),
    "base": (ARBITRATION_PLANNER, False),
    "ca": (ARBITRATION_PLANNER, True),
    "cp": (ARBITRATION_GATED, False),
    "astar": (ARBITRATION_PLANNER_STRICT, True),
    "rl": (ARBITRATION_REACTIVE, True),
}

ALLOCATORS = ("coupled", "greedy", "hungarian", "auction")

WARM_GATE_RESOURCE = "warm_gate.txt"


@dataclass(frozen=True)
class Variant:
    family: str
    allocator: str = "coupled"
    gate_init: str = "warm"
    gate_online: bool = True
    gate_file: Optional[str] = None

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise ConfigurationError(f"unknown variant family {self.family!r}")
        if self.allocator not in ALLOCATORS:
            raise ConfigurationError(f"unknown allocator {self.allocator!r}")
        if self.gate_init not in ("cold", "warm"):
            raise ConfigurationError(f"gate_init must be cold or warm, got {self.gate_init!r}")

    @property
    def arbitration(self) -> str:
        return _FAMILIES[self.family][0]

    @property
    def couple_assignment(self) -> bool:
        return _FAMILIES[self.family][1]

    @property
    def tag(self) -> str:
        mode = "adaptive" if self.gate_online else "static"
        return f"{self.family}+{self.allocator}+{self.gate_init}-{mode}"


def default_warm_gate_path() -> str:
    """Path of the packaged warm-start gate parameter file."""
    ref = resources.files("fronsim").joinpath("data", WARM_GATE_RESOURCE)
    return str(ref)


def parse_variant(tag: str) -> Variant:
    """Parse a variant tag like ``full``, ``base+greedy`` or
    ``full+coupled+cold-static``."""
    parts = [p for p in tag.strip().lower().split("+") if p]
    if not parts:
        raise ConfigurationError("empty variant tag")
    family = parts[0]
    allocator = "coupled"
    gate_init = "warm"
    gate_online = True
    for part in parts[1:]:
        if part in ALLOCATORS:
            allocator = part
        elif "-" in part:
            init, mode = part.split("-", 1)
            if init not in ("cold", "warm") or mode not in ("static", "adaptive"):
                raise ConfigurationError(f"bad gate mode {part!r}")
            gate_init = init
            gate_online = mode == "adaptive"
        else:
            raise ConfigurationError(f"unknown variant component {part!r}")
    return Variant(family=family, allocator=allocator, gate_init=gate_init, gate_online=gate_online)
