"""Microgrid SLA market simulator with rule-based and neuroevolved pricing brokers."""

from .broker import OptimisticPolicy, PessimisticPolicy, base_price
from .engine import run_simulation
from .errors import MicrogridError, ScenarioError, TopologyError
from .scenario import ScenarioConfig, load_scenario, reference_scenario

__all__ = [
    "MicrogridError", "OptimisticPolicy", "PessimisticPolicy", "ScenarioConfig", "ScenarioError",
    "TopologyError", "base_price", "load_scenario", "reference_scenario", "run_simulation",
]

__version__ = "0.1.0"
