"""Declarative scenarios: YAML documents, builtin examples and the runner."""

from __future__ import annotations

from importlib import resources

from ..errors import ScenarioError
from .demon import DemonPoint, LazyDemon, run_lazy_demon_sweep
from .document import ScenarioSpec, build, get_path, load_scenario, parse_scenario, set_path
from .runner import ReportBundle, emit_report, format_table, run_scenario
from .xmachine import XMachineResult, XMachineTask, random_search, xmachine_optimum

__all__ = [
    "ScenarioSpec", "load_scenario", "parse_scenario", "build", "get_path", "set_path",
    "ReportBundle", "run_scenario", "emit_report", "format_table",
    "LazyDemon", "DemonPoint", "run_lazy_demon_sweep",
    "XMachineTask", "XMachineResult", "xmachine_optimum", "random_search",
    "builtin_names", "builtin_text", "load_builtin",
]


def _builtin_dir():
    return resources.files(__package__) / "builtin"


def builtin_names() -> list[str]:
    return sorted(p.name[:-5] for p in _builtin_dir().iterdir() if p.name.endswith(".yaml"))


def builtin_text(name: str) -> str:
    p = _builtin_dir() / f"{name}.yaml"
    if not p.is_file():
        raise ScenarioError(f"no builtin scenario named {name!r}; see list-builtins")
    return p.read_text()


def load_builtin(name: str) -> ScenarioSpec:
    return load_scenario(builtin_text(name))
