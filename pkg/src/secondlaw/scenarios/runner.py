"""Executing scenarios and writing their reports."""

from __future__ import annotations

import contextvars
import json
import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import ScenarioError
from ..evolution import AccountingLedger, Quench, account, stepwise_isotherm
from ..ledger import InequalityReport, energy_dephasing, evaluate, free_energy_bound, ka_coherence_work
from ..qcore import HermitianOperator, UnitaryOperator, log_on_support
from .demon import LazyDemon, run_lazy_demon_sweep
from .document import ScenarioSpec, build
from .expressions import Context, number, operator_expr
from .xmachine import XMachineTask, random_search, xmachine_optimum

__all__ = ["ReportBundle", "run_scenario", "emit_report", "format_table"]


@dataclass
class ReportBundle:
    name: str
    seed: int
    sweep_param: str | None = None
    rows: list[dict] = field(default_factory=list)  # one per sweep point
    ledgers: list[AccountingLedger] = field(default_factory=list)
    task: dict[str, Any] = field(default_factory=dict)

    @property
    def reports(self) -> list[InequalityReport]:
        return [r for row in self.rows for r in row["reports"]]

    @property
    def ledger(self) -> AccountingLedger | None:
        return self.ledgers[0] if self.ledgers else None

    def report(self, name: str, point: int = 0) -> InequalityReport:
        return next(r for r in self.rows[point]["reports"] if r.name == name)

    @property
    def violation_detected(self) -> bool:
        return any(r.violated for r in self.reports)

    @property
    def exit_code(self) -> int:
        return 2 if self.violation_detected else 0

    def series(self) -> dict[str, list[tuple[float, float]]]:
        """Plot-ready ``(x, slack)`` pairs per inequality, in row order."""
        out: dict[str, list[tuple[float, float]]] = {}
        for i, row in enumerate(self.rows):
            x = row["x"] if row["x"] is not None else float(i)
            for r in row["reports"]:
                out.setdefault(r.name, []).append((float(x), r.slack))
        return out

    def records(self) -> list[dict]:
        out = []
        for row in self.rows:
            for r in row["reports"]:
                rec = r.to_record()
                rec["point"] = row["x"]
                if "verdict" in row:
                    rec["demon_verdict"] = row["verdict"]
                out.append(rec)
        return out


def _ledger_record(led: AccountingLedger) -> dict:
    return {
        "q": dict(led.q),
        "heat": led.heat,
        "work_on_system": led.work_on_system,
        "work_extracted": led.work,
        "delta_h_sys": led.delta_h_sys,
        "delta_interaction": led.delta_interaction,
        "q_external": led.q_external,
        "split_available": led.split_available,
        "closure": led.closure,
        "segments": [[s.index, s.step, s.kind] for s in led.segments],
    }


# ---------------------------------------------------------------------------
# tasks
# ---------------------------------------------------------------------------

def _task_xmachine(spec: ScenarioSpec, bundle: ReportBundle) -> None:
    setup, _ = build(spec)
    t = spec.task
    ctx = Context(spec.layout, np.random.default_rng(spec.seed))
    target = HermitianOperator(operator_expr(t["target"], ctx, "task.target"))
    task = XMachineTask(target, setup)
    res = xmachine_optimum(task)
    samples = int(t.get("samples", 0))
    bundle.task.update({"optimum": res.value, "initial": res.initial_value, "samples": samples})
    if samples:
        best = random_search(task, samples, np.random.default_rng(spec.seed + 1))
        bundle.task.update({"random_best": best, "random_margin": best - res.value})
    bundle.rows.append({"x": None, "reports": []})


def _task_lazy_demon(spec: ScenarioSpec, bundle: ReportBundle) -> None:
    setup, _ = build(spec)
    t = spec.task
    ctx = Context(spec.layout, np.random.default_rng(spec.seed))
    free = UnitaryOperator(operator_expr(t["free"], ctx, "task.free"))
    cond = {}
    for i, c in enumerate(t.get("conditional", [])):
        cond[int(c["outcome"])] = UnitaryOperator(operator_expr(c["unitary"], ctx, f"task.conditional.{i}.unitary"))
    demon = LazyDemon(free, cond)
    grid = [number(x, f"task.duty_grid.{i}") for i, x in enumerate(t["duty_grid"])]
    points = run_lazy_demon_sweep(grid, setup, demon, spec.alphas)
    bundle.sweep_param = "duty"
    for p in points:
        bundle.rows.append({"x": p.duty, "reports": list(p.reports), "verdict": p.verdict})
    regions = sorted({p.verdict for p in points})
    bundle.task.update({"regions": regions, "verdicts": [p.verdict for p in points]})


def ka_reversible_protocol(rho_i, h_s: HermitianOperator, temperature: float, n: int) -> list:
    """Quench to ``-T ln rho_i``, isotherm to ``-T ln diag(rho_i)``, quench back to ``h_s``."""
    h_start = -temperature * log_on_support(rho_i)
    h_end = -temperature * log_on_support(energy_dephasing(rho_i, h_s))
    return [Quench(h_start), *stepwise_isotherm([h_start, h_end], 1.0 / temperature, n), Quench(h_s)]


def _task_ka(spec: ScenarioSpec, bundle: ReportBundle) -> None:
    setup, _ = build(spec)
    t = spec.task
    temp = number(t["temperature"], "task.temperature")
    rho_i = setup.system_state()
    h_s = setup.local_hamiltonians[setup.system_label]
    ka = ka_coherence_work(rho_i, h_s, temp)
    bundle.task.update({"delta_s": ka.delta_s, "w_rev": ka.w_rev, "delta_s_divergence": ka.delta_s_divergence})
    bundle.sweep_param = "steps"
    if not rho_i.is_full_rank:
        return
    for n in t.get("steps", []):
        led = account(setup, ka_reversible_protocol(rho_i, h_s, temp, int(n)))
        rep = free_energy_bound(setup, led)
        bundle.rows.append({"x": int(n), "reports": [rep]})
        bundle.ledgers.append(led)
        bundle.task.setdefault("work_extracted", []).append(led.work)


_TASKS = {"xmachine": _task_xmachine, "lazy_demon": _task_lazy_demon, "ka_coherence": _task_ka}


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------

def _run_protocol(spec: ScenarioSpec) -> tuple[list[InequalityReport], AccountingLedger]:
    setup, protocol = build(spec)
    led = account(setup, protocol)
    return evaluate(setup, led, spec.inequalities, spec.alphas), led


def run_scenario(spec: ScenarioSpec) -> ReportBundle:
    """Run ``spec`` (every sweep point, or its task) and collect all reports."""
    bundle = ReportBundle(spec.name, spec.seed)
    if spec.task is not None:
        kind = spec.task.get("type")
        if kind not in _TASKS:
            raise ScenarioError(f"unknown task type {kind!r}", "task.type")
        if spec.sweep is not None:
            raise ScenarioError("tasks cannot be combined with a sweep", "sweep")
        _TASKS[kind](spec, bundle)
        return bundle
    if spec.sweep is None:
        reports, led = _run_protocol(spec)
        bundle.rows.append({"x": None, "reports": reports})
        bundle.ledgers.append(led)
        return bundle
    param, grid = spec.sweep
    bundle.sweep_param = param
    points = [spec.with_value(param, x) for x in grid]
    # points are independent; LAPACK releases the GIL, assembly stays in grid order
    with ThreadPoolExecutor(max_workers=min(len(points), os.cpu_count() or 1)) as pool:
        futures = [pool.submit(contextvars.copy_context().run, _run_protocol, p) for p in points]
        results = [f.result() for f in futures]
    for x, (reports, led) in zip(grid, results):
        bundle.rows.append({"x": x, "reports": reports})
        bundle.ledgers.append(led)
    return bundle


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------

def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name).strip("_")


def format_table(bundle: ReportBundle) -> str:
    """Human-readable table: one row per sweep point, one column per report."""
    names: list[str] = []
    for row in bundle.rows:
        for r in row["reports"]:
            if r.name not in names:
                names.append(r.name)
    head = [bundle.sweep_param or "point"] + names + (["verdict"] if any("verdict" in r for r in bundle.rows) else [])
    lines = ["\t".join(head)]
    for i, row in enumerate(bundle.rows):
        by = {r.name: r for r in row["reports"]}
        cells = [str(row["x"] if row["x"] is not None else i)]
        for n in names:
            r = by.get(n)
            cells.append("-" if r is None else f"{r.slack:+.6e} {r.verdict.value}")
        if "verdict" in row:
            cells.append(row["verdict"])
        lines.append("\t".join(cells))
    for k in sorted(bundle.task):
        lines.append(f"# {k} = {_clean(bundle.task[k])}")
    return "\n".join(lines) + "\n"


def emit_report(bundle: ReportBundle, out_dir: str | Path, fmt: str = "records") -> list[Path]:
    """Write records JSON and one two-column series file per inequality.

    Output is byte-stable for identical bundles. ``fmt="table"`` also writes
    the tab-separated summary table.
    """
    if fmt not in ("records", "table"):
        raise ValueError(f"unknown format {fmt!r}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    stem = _slug(bundle.name)
    doc = {
        "scenario": bundle.name,
        "seed": bundle.seed,
        "sweep_param": bundle.sweep_param,
        "records": bundle.records(),
        "ledgers": [_ledger_record(led) for led in bundle.ledgers],
        "task": bundle.task,
    }
    written = []
    path = out / f"{stem}.records.json"
    path.write_text(json.dumps(_clean(doc), sort_keys=True, indent=2) + "\n")
    written.append(path)
    for name, pts in bundle.series().items():
        p = out / f"{stem}.{_slug(name)}.tsv"
        lines = [f"# {bundle.sweep_param or 'point'}\tslack"]
        lines += [f"{x!r}\t{y!r}" for x, y in pts]
        p.write_text("\n".join(lines) + "\n")
        written.append(p)
    if fmt == "table":
        p = out / f"{stem}.table.txt"
        p.write_text(format_table(bundle))
        written.append(p)
    return written
