"""Discrete-event simulation of the handshakes under attack."""

from .engine import RunResult, run_scenario
from .scenario import Scenario, ScenarioError, load_scenario, scenario_from_dict, with_overrides
from .trace import Trace, TraceError, parse_trace

__all__ = [
    "RunResult",
    "Scenario",
    "ScenarioError",
    "Trace",
    "TraceError",
    "load_scenario",
    "parse_trace",
    "run_scenario",
    "scenario_from_dict",
    "with_overrides",
]
