"""Scenario documents: YAML in, (setup, protocol) out.

A document carries everything needed to reproduce a run; there are no
implicit defaults for dimensions or temperatures. Top-level keys:

``name``, ``seed``, ``layout``, ``hamiltonians``, ``preparation``,
``protocol``, ``inequalities``, optional ``alphas``, ``sweep`` and ``task``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from ..errors import InvariantError, ScenarioError
from ..evolution import (
    ChannelStep,
    ExplicitUnitary,
    Mixture,
    QuantumChannel,
    Quench,
    Segment,
    stepwise_isotherm,
    swap_thermalizer,
)
from ..layout import Factor, SetupLayout
from ..ledger import DEFAULT_ALPHAS, INEQUALITIES
from ..qcore import DensityMatrix, HermitianOperator, UnitaryOperator, embed
from ..setups import (
    PreparedSetup,
    build_coupled_gibbs_setup,
    build_product_setup,
    gibbs_state,
    squeeze_microbath,
)
from .expressions import Context, number, operator_expr

__all__ = ["ScenarioSpec", "load_scenario", "parse_scenario", "build", "set_path", "get_path"]

_TOP_KEYS = {"name", "description", "seed", "layout", "hamiltonians", "preparation", "protocol",
             "inequalities", "alphas", "sweep", "task"}


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    layout: SetupLayout | None
    preparation: dict
    protocol: list
    inequalities: tuple[str, ...]
    seed: int
    sweep: tuple[str, tuple] | None = None
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    task: dict | None = None
    document: dict = field(default_factory=dict, repr=False)

    def with_value(self, path: str, value: Any) -> "ScenarioSpec":
        doc = copy.deepcopy(self.document)
        set_path(doc, path, value)
        doc.pop("sweep", None)
        return parse_scenario(doc)


def _split(path: str) -> list:
    return [int(p) if p.lstrip("-").isdigit() else p for p in path.split(".") if p]


def get_path(doc: Any, path: str) -> Any:
    cur = doc
    for key in _split(path):
        try:
            cur = cur[key]
        except (KeyError, IndexError, TypeError):
            raise ScenarioError("path does not resolve", path) from None
    return cur


def set_path(doc: Any, path: str, value: Any) -> None:
    keys = _split(path)
    if not keys:
        raise ScenarioError("empty parameter path", path)
    parent = get_path(doc, ".".join(str(k) for k in keys[:-1])) if len(keys) > 1 else doc
    try:
        parent[keys[-1]]
    except (KeyError, IndexError, TypeError):
        raise ScenarioError("path does not resolve", path) from None
    parent[keys[-1]] = value


def load_scenario(source: str | Path) -> ScenarioSpec:
    """Read a scenario from a path or from YAML text."""
    p = Path(source) if not isinstance(source, Path) else source
    try:
        is_file = p.is_file()
    except OSError:
        is_file = False
    text = p.read_text() if is_file else str(source)
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"invalid YAML: {exc}") from None
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a mapping")
    return parse_scenario(doc)


def _require(doc: dict, key: str, path: str = "") -> Any:
    if key not in doc:
        raise ScenarioError("missing required field", f"{path}{key}")
    return doc[key]


def _layout(items, path="layout") -> SetupLayout:
    if not isinstance(items, list) or not items:
        raise ScenarioError("layout must be a nonempty list of factors", path)
    factors = []
    for i, f in enumerate(items):
        fp = f"{path}.{i}"
        if not isinstance(f, dict):
            raise ScenarioError("factor must be a mapping", fp)
        unknown = set(f) - {"label", "dim", "kind", "beta"}
        if unknown:
            raise ScenarioError(f"unknown factor keys {sorted(unknown)}", fp)
        kind = _require(f, "kind", fp + ".")
        beta = number(f["beta"], fp + ".beta") if "beta" in f else None
        dim = _require(f, "dim", fp + ".")
        if not isinstance(dim, int):
            raise ScenarioError("dim must be an integer", fp + ".dim")
        try:
            factors.append(Factor(str(_require(f, "label", fp + ".")), dim, kind, beta))
        except InvariantError as exc:
            raise ScenarioError(str(exc), fp) from None
    try:
        return SetupLayout(factors)
    except InvariantError as exc:
        raise ScenarioError(str(exc), path) from None


def parse_scenario(doc: dict) -> ScenarioSpec:
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ScenarioError(f"unknown top-level keys {sorted(unknown)}")
    name = str(_require(doc, "name"))
    seed = _require(doc, "seed")
    if not isinstance(seed, int) or seed < 0:
        raise ScenarioError("seed must be a non-negative integer", "seed")
    task = doc.get("task")
    layout = _layout(doc["layout"]) if "layout" in doc else None
    if layout is None and (task is None or "layout" in doc):
        raise ScenarioError("missing required field", "layout")
    ineq = tuple(doc.get("inequalities", ()))
    for i, n in enumerate(ineq):
        if n not in INEQUALITIES:
            raise ScenarioError(f"unknown inequality {n!r}", f"inequalities.{i}")
    alphas = tuple(number(a, f"alphas.{i}") for i, a in enumerate(doc.get("alphas", DEFAULT_ALPHAS)))
    if any(a <= 0 for a in alphas):
        raise ScenarioError("alphas must be positive", "alphas")
    sweep = None
    if "sweep" in doc:
        sw = doc["sweep"]
        param = _require(sw, "param", "sweep.")
        grid = tuple(_require(sw, "grid", "sweep."))
        if not grid:
            raise ScenarioError("sweep grid must be nonempty", "sweep.grid")
        get_path(doc, param)
        sweep = (str(param), grid)
    spec = ScenarioSpec(name, layout, dict(doc.get("preparation", {})), list(doc.get("protocol", [])),
                        ineq, seed, sweep, alphas, task, copy.deepcopy(doc))
    if layout is not None:
        build(spec)  # validate references eagerly
    return spec


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def _herm(expr, ctx, path) -> HermitianOperator:
    try:
        return HermitianOperator(operator_expr(expr, ctx, path))
    except InvariantError as exc:
        raise ScenarioError(str(exc), path) from None


def _unitary(expr, ctx, path) -> UnitaryOperator:
    try:
        return UnitaryOperator(operator_expr(expr, ctx, path))
    except InvariantError as exc:
        raise ScenarioError(str(exc), path) from None


def _state(expr, ctx, path) -> DensityMatrix:
    try:
        return DensityMatrix(operator_expr(expr, ctx, path))
    except InvariantError as exc:
        raise ScenarioError(str(exc), path) from None


def build_setup(spec: ScenarioSpec, ctx: Context) -> PreparedSetup:
    doc = spec.document
    layout = spec.layout
    hams_doc = doc.get("hamiltonians", {})
    if not isinstance(hams_doc, dict):
        raise ScenarioError("hamiltonians must map labels to operators", "hamiltonians")
    hams = {}
    for label, expr in hams_doc.items():
        if label not in layout.labels:
            raise ScenarioError(f"unknown factor {label!r}", f"hamiltonians.{label}")
        hams[label] = _herm(expr, ctx, f"hamiltonians.{label}")
    prep = spec.preparation
    kind = prep.get("type", "product")
    try:
        if kind in ("product", "squeezed"):
            state = None
            if layout.system_index is not None:
                state = _state(_require(prep, "system_state", "preparation."), ctx, "preparation.system_state")
            setup = build_product_setup(layout, state, hams)
            if kind == "squeezed":
                for label, expr in _require(prep, "squeeze", "preparation.").items():
                    setup = squeeze_microbath(setup, label, _unitary(expr, ctx, f"preparation.squeeze.{label}"))
        elif kind == "coupled_gibbs":
            hot = _require(prep, "hot", "preparation.")
            cold = prep.get("cold")
            system = layout.labels[layout.system_index] if layout.system_index is not None else None
            hint = _herm(_require(prep, "interaction", "preparation."), ctx, "preparation.interaction")
            setup = build_coupled_gibbs_setup(
                layout, hams[hot], hams[system], hint, hams.get(cold) if cold else None,
                layout[hot].beta, layout[cold].beta if cold else None, hot=hot, system=system, cold=cold)
        else:
            raise ScenarioError(f"unknown preparation type {kind!r}", "preparation.type")
    except ScenarioError:
        raise
    except (ValueError, KeyError) as exc:
        raise ScenarioError(str(exc), "preparation") from None
    return setup


class _ProtocolBuilder:
    def __init__(self, setup: PreparedSetup, ctx: Context):
        self.setup = setup
        self.ctx = ctx
        self.h = dict(setup.local_hamiltonians)

    def bare(self) -> np.ndarray:
        d = self.setup.layout.total_dim
        out = np.zeros((d, d), complex)
        for label, h in self.h.items():
            out = out + embed(h, self.setup.layout, [label])
        return out

    def steps(self, items, path) -> list:
        if not isinstance(items, list):
            raise ScenarioError("protocol must be a list of steps", path)
        out = []
        for i, item in enumerate(items):
            out.extend(self.step(item, f"{path}.{i}"))
        return out

    def step(self, item, path) -> list:
        if not isinstance(item, dict) or len(item) != 1:
            raise ScenarioError("each step is a mapping with exactly one key", path)
        (kind, arg), = item.items()
        p = f"{path}.{kind}"
        if kind == "segment":
            g = operator_expr(_require(arg, "generator", p + "."), self.ctx, p + ".generator")
            if g.shape[0] != self.setup.layout.total_dim:
                raise ScenarioError("segment generator must act on the full setup (use 'on')", p)
            if arg.get("include_bare", True):
                g = g + self.bare()
            return [Segment(_herm(g, self.ctx, p), number(_require(arg, "duration", p + "."), p + ".duration"))]
        if kind == "unitary":
            u = _unitary(arg, self.ctx, p)
            if u.dim != self.setup.layout.total_dim:
                raise ScenarioError("unitary must act on the full setup (use 'on')", p)
            return [ExplicitUnitary(u)]
        if kind == "quench":
            label = arg.get("label", self.setup.system_label)
            if label not in self.setup.layout.labels:
                raise ScenarioError(f"unknown factor {label!r}", p + ".label")
            h = _herm(_require(arg, "hamiltonian", p + "."), self.ctx, p + ".hamiltonian")
            self.h[label] = h
            return [Quench(h, label)]
        if kind == "mixture":
            branches = []
            for j, br in enumerate(arg):
                bp = f"{p}.{j}"
                saved = dict(self.h)
                steps = self.steps(_require(br, "steps", bp + "."), bp + ".steps")
                self.h = saved
                branches.append((number(_require(br, "p", bp + "."), bp + ".p"), steps))
            try:
                return [Mixture(branches)]
            except (InvariantError, TypeError) as exc:
                raise ScenarioError(str(exc), p) from None
        if kind == "channel":
            target = arg.get("target", self.setup.system_label)
            if target not in self.setup.layout.labels:
                raise ScenarioError(f"unknown factor {target!r}", p + ".target")
            if "thermalizer" in arg:
                t = arg["thermalizer"]
                h = _herm(t["hamiltonian"], self.ctx, p + ".thermalizer.hamiltonian") if "hamiltonian" in t \
                    else self.h[target]
                ch = swap_thermalizer(h, number(_require(t, "beta", p + ".thermalizer."), p + ".thermalizer.beta"),
                                      number(t.get("angle", "pi/2"), p + ".thermalizer.angle"))
            else:
                env_h = _herm(_require(arg, "env_hamiltonian", p + "."), self.ctx, p + ".env_hamiltonian")
                beta = number(_require(arg, "beta", p + "."), p + ".beta")
                ch = QuantumChannel(gibbs_state(env_h, beta), _unitary(_require(arg, "unitary", p + "."),
                                                                       self.ctx, p + ".unitary"), env_h, beta)
            return [ChannelStep(ch, target)]
        if kind == "isotherm":
            target = arg.get("target", self.setup.system_label)
            path_ops = [_herm(e, self.ctx, f"{p}.path.{j}") for j, e in enumerate(_require(arg, "path", p + "."))]
            n = _require(arg, "steps", p + ".")
            if not isinstance(n, int) or n < 1:
                raise ScenarioError("steps must be a positive integer", p + ".steps")
            beta = number(_require(arg, "beta", p + "."), p + ".beta")
            self.h[target] = path_ops[-1]
            return stepwise_isotherm(path_ops, beta, n, target=target)
        raise ScenarioError(f"unknown step kind {kind!r}", path)


def build(spec: ScenarioSpec) -> tuple[PreparedSetup, list]:
    """Setup and protocol of a scenario; randomness is drawn from ``spec.seed`` only."""
    if spec.layout is None:
        raise ScenarioError("scenario has no layout", "layout")
    ctx = Context(spec.layout, np.random.default_rng(spec.seed))
    setup = build_setup(spec, ctx)
    protocol = _ProtocolBuilder(setup, ctx).steps(spec.protocol, "protocol")
    return setup, protocol
