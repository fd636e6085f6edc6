"""Deterministic discrete-event simulator for PoVF networks."""

from povf.sim.adversary import apply_adversary
from povf.sim.config import (
    AdversaryModel,
    ChurnModel,
    ConfigError,
    LatencyModel,
    SimConfig,
    config_from_dict,
    load_config,
)
from povf.sim.runner import SimReport, SimulationAbort, run

__all__ = [
    "AdversaryModel", "ChurnModel", "ConfigError", "LatencyModel", "SimConfig", "SimReport",
    "SimulationAbort", "apply_adversary", "config_from_dict", "load_config", "run",
]
