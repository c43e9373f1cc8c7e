from .oracle import brute_force_oracle, discriminates
from .runner import RunReport, ScenarioRuntimeError, ScriptAssertionError, run_scenario
from .scenario import Scenario, ScenarioError, bundled_path, bundled_scenarios, load_scenario, parse_scenario

__all__ = [
    "RunReport",
    "Scenario",
    "ScenarioError",
    "ScenarioRuntimeError",
    "ScriptAssertionError",
    "brute_force_oracle",
    "bundled_path",
    "bundled_scenarios",
    "discriminates",
    "load_scenario",
    "parse_scenario",
    "run_scenario",
]
