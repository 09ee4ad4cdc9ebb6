from .runner import RunManifest, run, validate
from .scenario import Scenario, ScenarioError, load_scenario, parse_scenario
