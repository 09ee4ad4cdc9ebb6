"""Scenario files: parsing, defaults and schema checks."""

import copy
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

KINDS = ("gate-sweep-detuning", "gate-sweep-duration", "error-budget", "tomography-fit",
         "tomography-synthetic", "rb", "favg", "pumping-bound")

REQUIRED = {
    "gate-sweep-detuning": ("detunings_ghz",),
    "gate-sweep-duration": ("t_gates_us",),
    "error-budget": (),
    "tomography-fit": ("input_dir",),
    "tomography-synthetic": ("fidelity", "trials"),
    "rb": ("lengths", "per_length"),
    "favg": (),
    "pumping-bound": ("t_b", "l", "t_bar_b"),
}


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    kind: str
    params: dict
    seed: int
    output_dir: str = "out"
    tolerances: dict = field(default_factory=dict)
    source: str = ""  # path the scenario was read from, if any

    def canonical(self):
        """Scenario content as stable JSON (output_dir and source excluded)."""
        return json.dumps({"kind": self.kind, "params": self.params, "seed": self.seed,
                           "tolerances": self.tolerances}, sort_keys=True, separators=(",", ":"))

    def hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def with_overrides(self, seed=None, output_dir=None, tolerances=None):
        tol = dict(self.tolerances)
        tol.update(tolerances or {})
        return Scenario(self.kind, self.params, self.seed if seed is None else int(seed),
                        self.output_dir if output_dir is None else str(output_dir), tol, self.source)


def defaults():
    text = resources.files("ionbench.harness").joinpath("defaults.yaml").read_text()
    return yaml.safe_load(text)


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _lines(node, prefix=""):
    """Map dotted key paths to 1-based line numbers."""
    out = {}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = f"{prefix}.{k.value}" if prefix else str(k.value)
            out[path] = k.start_mark.line + 1
            out.update(_lines(v, path))
    return out


def _fail(msg, path, lines, source):
    where = f"{source}:" if source else ""
    line = lines.get(path)
    loc = f"{where}{line}: " if line else (f"{where} " if where else "")
    raise ScenarioError(f"{loc}field '{path}': {msg}")


def parse_scenario(text, source=""):
    """Scenario from YAML text; defaults for the kind are merged under
    ``params``. Raises ScenarioError naming the line and field."""
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f"{mark.line + 1}: " if mark else ""
        raise ScenarioError(f"{source}:{line}parse error: {getattr(exc, 'problem', exc)}") from None
    if data is None:
        raise ScenarioError(f"{source}: empty scenario file")
    if not isinstance(data, dict):
        raise ScenarioError(f"{source}:1: scenario must be a mapping")
    lines = _lines(node)
    for key in data:
        if key not in ("kind", "params", "seed", "output_dir", "tolerances"):
            _fail("unknown top-level field", str(key), lines, source)
    kind = data.get("kind")
    if kind not in KINDS:
        _fail(f"must be one of {', '.join(KINDS)}", "kind", lines, source)
    if "seed" not in data:
        _fail("seed is mandatory", "seed", lines, source)
    seed = data["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        _fail("must be a non-negative integer", "seed", lines, source)
    params = data.get("params") or {}
    if not isinstance(params, dict):
        _fail("must be a mapping", "params", lines, source)
    for key in REQUIRED[kind]:
        if key not in params:
            _fail("required for this kind", f"params.{key}", lines, source)
    tolerances = data.get("tolerances") or {}
    if not isinstance(tolerances, dict) or not all(isinstance(v, (int, float)) for v in tolerances.values()):
        _fail("must map names to numbers", "tolerances", lines, source)
    params = _merge(defaults().get(kind, {}), params)
    return Scenario(kind, params, seed, str(data.get("output_dir", "out")), dict(tolerances), source)


def load_scenario(path):
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"{path}: no such file")
    return parse_scenario(path.read_text(), str(path))
