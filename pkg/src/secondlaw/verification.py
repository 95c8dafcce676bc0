"""Acceptance suite: the property checks behind ``secondlaw verify``.

Each check draws from its own seeded generator, so results are reproducible
and independent of the order in which checks run.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .evolution import (
    ExplicitUnitary,
    Mixture,
    QuantumChannel,
    check_contractivity,
    check_fixed_point,
    evolve,
    swap_thermalizer,
)
from .layout import Factor, SetupLayout
from .ledger import (
    DEFAULT_ALPHAS,
    alpha_family,
    cci,
    clausius,
    clausius_strong,
    energy_dephasing,
    ka_coherence_work,
    passivity_divergence,
)
from .qcore import DensityMatrix, HermitianOperator, UnitaryOperator, relative_entropy, vn_entropy
from .sampling import haar_unitaries, haar_unitary, random_density_matrix, random_hermitian
from .setups import PreparedSetup, build_coupled_gibbs_setup, build_product_setup, gibbs_state

__all__ = ["CheckResult", "CHECKS", "run_acceptance", "random_product_setup", "random_protocol",
           "random_coupled_setup"]

SLACK_TOL = 1e-8


@dataclass(frozen=True)
class CheckResult:
    number: int
    title: str
    passed: bool
    detail: str
    elapsed: float

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.number:2d} {self.title}: {self.detail} ({self.elapsed:.2f}s)"


# ---------------------------------------------------------------------------
# random ensembles
# ---------------------------------------------------------------------------

def _random_dims(rng: np.random.Generator, lo: int, hi: int, with_system: bool) -> list[int]:
    while True:
        n = int(rng.integers(1, 4)) + int(with_system)
        dims = [int(d) for d in rng.integers(2, 5, size=n)]
        if lo <= math.prod(dims) <= hi:
            return dims


def random_product_setup(rng: np.random.Generator, *, lo: int = 4, hi: int = 32,
                         full_rank: bool = False, with_system: bool | None = None) -> PreparedSetup:
    """System (maybe absent) plus one to three thermal microbaths, total dim in ``[lo, hi]``."""
    if with_system is None:
        with_system = bool(rng.random() < 0.85)
    dims = _random_dims(rng, lo, hi, with_system)
    factors, hams = [], {}
    for i, d in enumerate(dims):
        if with_system and i == 0:
            factors.append(Factor("s", d, "system"))
        else:
            factors.append(Factor(f"b{i}", d, "microbath", float(rng.uniform(0.2, 3.0))))
        hams[factors[-1].label] = random_hermitian(d, rng)
    layout = SetupLayout(factors)
    state = None
    if with_system:
        rank = None if full_rank or rng.random() < 0.7 else int(rng.integers(1, dims[0] + 1))
        state = random_density_matrix(dims[0], rng, rank=rank)
    return build_product_setup(layout, state, hams)


def random_protocol(rng: np.random.Generator, dim: int, *, mixture: bool | None = None) -> list:
    """A Haar unitary, or a mixture of two to four of them."""
    if mixture is None:
        mixture = bool(rng.random() < 0.5)
    if not mixture:
        return [ExplicitUnitary(haar_unitary(dim, rng))]
    k = int(rng.integers(2, 5))
    p = rng.dirichlet(np.ones(k))
    us = haar_unitaries(k, dim, rng)
    return [Mixture([(float(pi), ExplicitUnitary(UnitaryOperator(u))) for pi, u in zip(p, us)])]


def random_coupled_setup(rng: np.random.Generator) -> PreparedSetup:
    """Hot bath and system in a joint Gibbs state of a random interaction, plus a cold bath."""
    dh, ds, dc = (int(d) for d in rng.integers(2, 4, size=3))
    beta_h = float(rng.uniform(0.2, 2.0))
    beta_c = float(rng.uniform(0.2, 3.0))
    layout = SetupLayout([Factor("h", dh, "microbath", beta_h), Factor("s", ds, "system"),
                          Factor("c", dc, "microbath", beta_c)])
    g = float(rng.uniform(0.1, 1.0))
    return build_coupled_gibbs_setup(layout, random_hermitian(dh, rng), random_hermitian(ds, rng),
                                     random_hermitian(dh * ds, rng, scale=g), random_hermitian(dc, rng),
                                     beta_h, beta_c)


# ---------------------------------------------------------------------------
# the checks
# ---------------------------------------------------------------------------

def _check_ci_ensemble(rng):
    t0 = time.perf_counter()
    worst, n = math.inf, 500
    for _ in range(n):
        setup = random_product_setup(rng)
        final = evolve(setup, random_protocol(rng, setup.layout.total_dim))
        worst = min(worst, clausius(setup, final).slack)
    dt = time.perf_counter() - t0
    return worst >= -SLACK_TOL and dt < 60, f"min slack {worst:.3e} over {n} cases in {dt:.1f}s"


def _check_strong_identity(rng):
    worst, n = 0.0, 500
    for _ in range(n):
        setup = random_product_setup(rng)
        final = evolve(setup, random_protocol(rng, setup.layout.total_dim))
        strong = clausius_strong(setup, final)
        if strong.reason == "support_violation":
            continue
        gap = clausius(setup, final).slack - strong.slack
        d = sum(relative_entropy(setup.reduced(b, final), setup.reduced(b)) for b in setup.bath_labels)
        worst = max(worst, abs(gap - d))
    return worst < 1e-8, f"max identity residual {worst:.3e}"


def _check_cci(rng):
    from .scenarios import load_builtin, run_scenario

    b = run_scenario(load_builtin("coupled-gibbs-cci"))
    ci, corr = b.report("clausius"), b.report("cci")
    constructed = (ci.violated or ci.verdict.value == "inapplicable") and ci.slack < 0 and corr.slack >= -SLACK_TOL
    worst, n = math.inf, 500
    for _ in range(n):
        setup = random_coupled_setup(rng)
        final = evolve(setup, random_protocol(rng, setup.layout.total_dim))
        worst = min(worst, cci(setup, final).slack)
    ok = constructed and worst >= -SLACK_TOL
    return ok, (f"constructed: CI slack {ci.slack:.4f} ({ci.verdict.value}), CCI slack {corr.slack:.4f}; "
                f"random min CCI slack {worst:.3e} over {n}")


def _check_alpha_family(rng):
    worst_a, worst_d, n = math.inf, math.inf, 200
    for _ in range(n):
        setup = random_product_setup(rng, full_rank=True)
        final = evolve(setup, random_protocol(rng, setup.layout.total_dim, mixture=True))
        worst_a = min(worst_a, *(r.slack for r in alpha_family(setup, final, DEFAULT_ALPHAS)))
        worst_d = min(worst_d, passivity_divergence(setup, final).slack)
    ok = worst_a >= -1e-9 and worst_d >= -SLACK_TOL
    return ok, f"min alpha slack {worst_a:.3e}, min divergence slack {worst_d:.3e} over {n}"


def _fit_inverse(ns, slacks) -> tuple[float, float]:
    ns, s = np.asarray(ns, float), np.asarray(slacks, float)
    c = float(np.sum(s / ns) / np.sum(1.0 / ns ** 2))
    resid = float(np.max(np.abs(s - c / ns) / s))
    return c, resid


def _check_isotherm(rng):
    from .scenarios import load_builtin, run_scenario

    spec = load_builtin("stepwise-isotherm")
    ns = [2, 8, 32, 64]
    slacks = [run_scenario(spec.with_value("protocol.0.isotherm.steps", n)).report("clausius_isochore").slack
              for n in ns]
    monotone = all(a > b for a, b in zip(slacks, slacks[1:]))
    c, resid = _fit_inverse(ns, slacks)
    return monotone and resid < 0.10, f"slacks {[round(x, 6) for x in slacks]}, c = {c:.4f}, residual {resid:.1%}"


def _check_landauer(rng):
    from .scenarios import load_builtin, run_scenario

    r = run_scenario(load_builtin("landauer-erasure")).report("clausius")
    bq = r.lhs_terms["beta*q[b]"]
    qs = run_scenario(load_builtin("landauer-quasistatic"))
    released = [row["reports"][0].lhs_terms["-beta*Q"] for row in qs.rows]
    gaps = [x - math.log(2) for x in released]
    approach = all(a > b for a, b in zip(gaps, gaps[1:])) and gaps[-1] < 0.02 and min(gaps) >= -SLACK_TOL
    ok = bq >= math.log(2) - SLACK_TOL and approach
    return ok, f"one-shot beta*q = {bq:.4f}; quasi-static beta*q - ln 2 = {[f'{g:.2e}' for g in gaps]}"


def _check_ka(rng):
    plus = DensityMatrix.pure([1, 1])
    h = HermitianOperator.diag([0.0, 1.0])
    ka = ka_coherence_work(plus, h, 1.0)
    w_entropy, w_div = 1.0 * ka.delta_s, 1.0 * ka.delta_s_divergence
    ok_plus = abs(w_entropy - math.log(2)) < 1e-9 and abs(w_div - math.log(2)) < 1e-9
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(2, 6))
        levels = rng.integers(0, d, size=d).astype(float)  # allows degeneracies
        hs = HermitianOperator.diag(levels) if rng.random() < 0.5 else random_hermitian(d, rng)
        rho = random_density_matrix(d, rng)
        diag = energy_dephasing(rho, hs)
        worst = max(worst, abs((vn_entropy(diag) - vn_entropy(rho)) - relative_entropy(rho, diag)))
    return ok_plus and worst < 1e-9, f"|+>: {w_entropy:.12f} / {w_div:.12f}; max formula gap {worst:.2e}"


def _check_xmachine(rng):
    from .scenarios import build, load_builtin
    from .scenarios.xmachine import XMachineTask, random_search, xmachine_optimum

    t0 = time.perf_counter()
    spec = load_builtin("xmachine-qutrit")
    setup, _ = build(spec)
    target = HermitianOperator(np.kron(np.diag([0.0, 0.0, 1.0]), np.eye(8)))
    task = XMachineTask(target, setup)
    opt = xmachine_optimum(task).value
    oracle = float(np.sort(np.linalg.eigvalsh(setup.rho0.matrix))[:8].sum())
    best = random_search(task, 100_000, rng)
    dt = time.perf_counter() - t0
    ok = abs(opt - oracle) < 1e-10 and best >= opt - 1e-9 and dt < 30
    return ok, f"optimum {opt:.12f} vs oracle {oracle:.12f}; best random {best:.6f}; {dt:.1f}s"


def _check_demon(rng):
    from .scenarios import load_builtin, run_scenario

    spec = load_builtin("lazy-demon-sweep")
    b = run_scenario(spec)
    regions = set(b.task["verdicts"])
    need = {"none_detected", "alpha_violation", "ci_violation"}
    grid = [row["x"] for row in b.rows]
    if need <= regions:
        order = " -> ".join(dict.fromkeys(b.task["verdicts"]))
        return True, f"all three regions over duty grid {grid[0]}..{grid[-1]} ({len(grid)} points): {order}"
    return False, f"missing regions {sorted(need - regions)} on duty grid {grid}"


def _check_fixed_point(rng):
    worst_fp = 0.0
    for _ in range(50):
        d = int(rng.integers(2, 5))
        h = random_hermitian(d, rng)
        beta = float(rng.uniform(0.2, 3.0))
        ch = swap_thermalizer(h, beta, float(rng.uniform(0, math.pi)))
        assert ch.is_energy_conserving(h)
        worst_fp = max(worst_fp, check_fixed_point(ch, gibbs_state(h, beta)).residual)
    worst_c, n = -math.inf, 500
    for _ in range(n):
        d, de = int(rng.integers(2, 4)), int(rng.integers(2, 4))
        env = random_density_matrix(de, rng)
        ch = QuantumChannel(env, haar_unitary(d * de, rng))
        before, after = check_contractivity(ch, random_density_matrix(d, rng), random_density_matrix(d, rng))
        worst_c = max(worst_c, after - before)
    ok = worst_fp < 1e-9 and worst_c <= 1e-9
    return ok, f"max fixed-point residual {worst_fp:.2e}; max D increase {worst_c:.2e} over {n} pairs"


def _check_deficiency(rng):
    from .scenarios import load_builtin, run_scenario

    cold = run_scenario(load_builtin("cold-bath-deficiency"))
    row = next(r for r in cold.rows if r["x"] == 50.0)
    terms = row["reports"][0].lhs_terms
    ratio = abs(terms["dS_sys"]) / abs(terms["beta*q[b]"])
    deph = run_scenario(load_builtin("dephasing-deficiency"))
    q = deph.ledger.q["b"]
    ds = deph.report("clausius").lhs_terms["dS_sys"]
    ok = ratio < 0.05 and q == 0.0 and ds >= 0
    return ok, f"cold-bath ratio {ratio:.4f}; dephasing q = {q!r}, dS_sys = {ds:.4f}"


CHECKS: list[tuple[int, str, Callable]] = [
    (1, "CI ensemble", _check_ci_ensemble),
    (2, "strong-form identity", _check_strong_identity),
    (3, "CCI beyond CI", _check_cci),
    (4, "global passivity family", _check_alpha_family),
    (5, "reversible saturation", _check_isotherm),
    (6, "Landauer erasure", _check_landauer),
    (7, "coherence work", _check_ka),
    (8, "X-machine optimality", _check_xmachine),
    (9, "demon detection staircase", _check_demon),
    (10, "fixed point and contractivity", _check_fixed_point),
    (11, "deficiency reproductions", _check_deficiency),
]


def run_check(number: int, seed: int = 0) -> CheckResult:
    _, title, fn = next(c for c in CHECKS if c[0] == number)
    rng = np.random.default_rng([seed, number])
    t0 = time.perf_counter()
    try:
        passed, detail = fn(rng)
    except Exception as exc:  # a crashing check is a failing check
        passed, detail = False, f"error: {type(exc).__name__}: {exc}"
    return CheckResult(number, title, bool(passed), detail, time.perf_counter() - t0)


def run_acceptance(numbers: Iterable[int] | None = None, seed: int = 0) -> list[CheckResult]:
    wanted = [c[0] for c in CHECKS] if numbers is None else list(numbers)
    return [run_check(n, seed) for n in wanted]
