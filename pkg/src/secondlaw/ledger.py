"""Second-law-like inequalities evaluated on a (setup, final state) pair.

Every function returns an :class:`InequalityReport` whose ``slack`` is
``lhs_total - rhs_total``. A report holds when ``slack >= -tol_slack``.
Preconditions that fail do not skip the evaluation: the values are still
computed where possible and the verdict becomes ``inapplicable`` with a
machine-readable ``reason``.

``final`` arguments accept either the final global ``DensityMatrix`` or the
``AccountingLedger`` returned by :func:`secondlaw.evolution.account`; the
ledger carries bath-Hamiltonian information that plain states lack.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .config import get_tolerances
from .errors import RankDeficiencyError
from .evolution import AccountingLedger, QuantumChannel
from .passivity import global_passivity_operator, passive_energy
from .qcore import (
    DensityMatrix,
    HermitianOperator,
    embed,
    expectation,
    log_on_support,
    partial_trace,
    relative_entropy,
    vn_entropy,
)
from .setups import PreparedSetup, effective_hamiltonian, gibbs_state

__all__ = [
    "Verdict",
    "InequalityReport",
    "DemonVerdict",
    "KACoherenceWork",
    "energy_dephasing",
    "DEFAULT_ALPHAS",
    "entropic_form",
    "clausius",
    "clausius_strong",
    "observable_ci",
    "ci_compact",
    "cci",
    "cci_coupled_gibbs",
    "passive_ci",
    "alpha_family",
    "passivity_divergence",
    "free_energy_bound",
    "clausius_isochore",
    "ka_coherence_work",
    "bq_bound",
    "demon_verdict",
    "INEQUALITIES",
    "evaluate",
]

DEFAULT_ALPHAS = (0.5, 1.0, 2.0, 3.0)


class Verdict(str, enum.Enum):
    HOLDS = "holds"
    VIOLATED = "violated"
    INAPPLICABLE = "inapplicable"


@dataclass(frozen=True)
class InequalityReport:
    name: str
    lhs_terms: dict[str, float]
    lhs_total: float
    rhs_total: float
    slack: float
    verdict: Verdict
    reason: str | None = None
    applicability_note: str = ""
    rhs_terms: dict[str, float] = field(default_factory=dict)
    extra: dict[str, float] = field(default_factory=dict)
    provenance: dict[str, str] = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.verdict is Verdict.HOLDS

    @property
    def violated(self) -> bool:
        return self.verdict is Verdict.VIOLATED

    def to_record(self) -> dict:
        return {
            "name": self.name,
            "terms": dict(self.lhs_terms),
            "rhs_terms": dict(self.rhs_terms),
            "extra": dict(self.extra),
            "lhs_total": self.lhs_total,
            "rhs_total": self.rhs_total,
            "slack": self.slack,
            "verdict": self.verdict.value,
            "reason": self.reason,
            "note": self.applicability_note,
        }


def _make(name: str, terms: dict[str, float], *, rhs_terms: dict[str, float] | None = None,
          reason: str | None = None, note: str = "", extra: dict[str, float] | None = None,
          provenance: dict[str, str] | None = None) -> InequalityReport:
    rhs_terms = rhs_terms or {}
    lhs = float(sum(terms.values()))
    rhs = float(sum(rhs_terms.values()))
    slack = lhs - rhs if math.isfinite(lhs) and math.isfinite(rhs) else math.nan
    if reason is None and not math.isfinite(slack):
        reason = "non_finite"
        note = note or "a term is infinite or undefined"
    if reason is not None:
        verdict = Verdict.INAPPLICABLE
    elif slack >= -get_tolerances().tol_slack:
        verdict = Verdict.HOLDS
    else:
        verdict = Verdict.VIOLATED
    return InequalityReport(name, dict(terms), lhs, rhs, slack, verdict, reason, note,
                            dict(rhs_terms), dict(extra or {}), dict(provenance or {}))


# ---------------------------------------------------------------------------
# shared quantities
# ---------------------------------------------------------------------------

def _unpack(final) -> tuple[DensityMatrix, AccountingLedger | None]:
    if isinstance(final, AccountingLedger):
        return final.final_state, final
    if isinstance(final, DensityMatrix):
        return final, None
    raise TypeError(f"expected a DensityMatrix or AccountingLedger, got {type(final).__name__}")


def _delta_entropy(setup: PreparedSetup, final: DensityMatrix, label: str) -> float:
    return vn_entropy(setup.reduced(label, final)) - vn_entropy(setup.reduced(label))


def _delta_local(setup: PreparedSetup, final: DensityMatrix, label: str, op) -> float:
    return expectation(setup.reduced(label, final), op) - expectation(setup.reduced(label), op)


def _heats(setup: PreparedSetup, final: DensityMatrix, led: AccountingLedger | None) -> dict[str, float]:
    if led is not None:
        return dict(led.q)
    return {k: _delta_local(setup, final, k, setup.local_hamiltonians[k]) for k in setup.bath_labels}


def _thermal_ci_reason(setup: PreparedSetup, led: AccountingLedger | None) -> tuple[str | None, str]:
    if setup.correlated:
        return "correlated_preparation", "initial state is not a product of its marginals"
    if setup.squeezers:
        return "non_thermal_bath", "a microbath was squeezed away from its Gibbs state"
    if led is not None and not led.bath_hamiltonians_restored:
        return "bath_hamiltonian_modified", "a bath Hamiltonian differs at the end of the protocol"
    return None, ""


def _minus_log(rho: DensityMatrix) -> HermitianOperator:
    if not rho.is_full_rank:
        raise RankDeficiencyError(f"state has rank {rho.rank} < {rho.dim}")
    return -log_on_support(rho)


def _env_labels(setup: PreparedSetup) -> list[str]:
    return [setup.layout.labels[i] for i in setup.layout.environment_indices]


# ---------------------------------------------------------------------------
# product-state inequalities
# ---------------------------------------------------------------------------

def entropic_form(setup: PreparedSetup, final) -> InequalityReport:
    """Sum of the entropy changes of every element."""
    rho_f, _ = _unpack(final)
    terms = {f"dS[{k}]": _delta_entropy(setup, rho_f, k) for k in setup.layout.labels}
    reason, note = (("correlated_preparation", "initial state is correlated")
                    if setup.correlated else (None, ""))
    return _make("entropic_form", terms, reason=reason, note=note,
                 provenance={t: "von Neumann entropy change of the reduced state" for t in terms})


def clausius(setup: PreparedSetup, final) -> InequalityReport:
    """Entropy change of the system plus the beta-weighted bath energy changes."""
    rho_f, led = _unpack(final)
    terms = {}
    prov = {}
    if setup.system_label is not None:
        terms["dS_sys"] = _delta_entropy(setup, rho_f, setup.system_label)
        prov["dS_sys"] = "von Neumann entropy change of the system"
    for k, q in _heats(setup, rho_f, led).items():
        terms[f"beta*q[{k}]"] = setup.beta(k) * q
        prov[f"beta*q[{k}]"] = f"initial inverse temperature times energy change of {k}"
    reason, note = _thermal_ci_reason(setup, led)
    return _make("clausius", terms, reason=reason, note=note, provenance=prov)


def clausius_strong(setup: PreparedSetup, final) -> InequalityReport:
    """As :func:`clausius`, bounded below by the bath divergences instead of zero."""
    rho_f, led = _unpack(final)
    base = clausius(setup, final)
    rhs = {f"D[{k}]": relative_entropy(setup.reduced(k, rho_f), setup.reduced(k))
           for k in setup.bath_labels}
    reason, note = base.reason, base.applicability_note
    if reason is None and not all(math.isfinite(v) for v in rhs.values()):
        reason, note = "support_violation", "a final bath state leaves the initial support"
    prov = dict(base.provenance)
    prov.update({t: "relative entropy of final to initial bath state" for t in rhs})
    return _make("clausius_strong", base.lhs_terms, rhs_terms=rhs, reason=reason, note=note,
                 provenance=prov)


def observable_ci(setup: PreparedSetup, final) -> InequalityReport:
    """``-ln rho0_sys`` stands in for the system entropy; linear in the final state."""
    rho_f, led = _unpack(final)
    terms, extra = {}, {}
    reason, note = _thermal_ci_reason(setup, led)
    s = setup.system_label
    if s is not None:
        rs0, rsf = setup.reduced(s), setup.reduced(s, rho_f)
        try:
            b_sys = _minus_log(rs0)
            terms["d<B_sys>"] = expectation(rsf, b_sys) - expectation(rs0, b_sys)
        except RankDeficiencyError:
            terms["d<B_sys>"] = math.nan
            reason, note = "rank_deficient", "initial system state is not full rank"
        extra["D_sys"] = relative_entropy(rsf, rs0)
    for k, q in _heats(setup, rho_f, led).items():
        terms[f"beta*q[{k}]"] = setup.beta(k) * q
    return _make("observable_ci", terms, reason=reason, note=note, extra=extra,
                 provenance={"d<B_sys>": "change of <-ln rho0_sys>"})


def ci_compact(setup: PreparedSetup, final) -> InequalityReport:
    """System entropy change plus the change of ``<-ln rho0_env>``."""
    rho_f, led = _unpack(final)
    terms = {}
    reason, note = _thermal_ci_reason(setup, led)
    if reason in ("non_thermal_bath", "bath_hamiltonian_modified"):
        reason, note = None, ""  # the compact form only needs a product preparation
    s = setup.system_label
    if s is not None:
        terms["dS_sys"] = _delta_entropy(setup, rho_f, s)
    env = _env_labels(setup)
    if env:
        r0 = setup.reduced(env)
        try:
            b_env = _minus_log(r0)
            terms["d<B_env>"] = expectation(setup.reduced(env, rho_f), b_env) - expectation(r0, b_env)
        except RankDeficiencyError:
            terms["d<B_env>"] = math.nan
            reason, note = "rank_deficient", "initial environment state is not full rank"
    return _make("ci_compact", terms, reason=reason, note=note)


# ---------------------------------------------------------------------------
# global passivity family
# ---------------------------------------------------------------------------

def _b_tot(setup: PreparedSetup):
    try:
        return _minus_log(setup.rho0), None
    except RankDeficiencyError:
        return None, ("rank_deficient", "initial global state is not full rank")


def cci(setup: PreparedSetup, final) -> InequalityReport:
    """Correlation-compatible form: ``dS_sys + d<B_tot> - d<B_sys> >= 0``."""
    rho_f, _ = _unpack(final)
    b_tot, bad = _b_tot(setup)
    reason, note = bad or (None, "")
    terms: dict[str, float] = {}
    extra: dict[str, float] = {}
    s = setup.system_label
    rho0 = setup.rho0
    if s is not None:
        terms["dS_sys"] = _delta_entropy(setup, rho_f, s)
    terms["d<B_tot>"] = (expectation(rho_f, b_tot) - expectation(rho0, b_tot)) if b_tot is not None else math.nan
    if s is not None:
        rs0 = setup.reduced(s)
        try:
            b_sys = _minus_log(rs0)
            terms["-d<B_sys>"] = -_delta_local(setup, rho_f, s, b_sys)
        except RankDeficiencyError:
            terms["-d<B_sys>"] = math.nan
            reason, note = "rank_deficient", "initial system state is not full rank"
        env = _env_labels(setup)
        if b_tot is not None and env and math.isfinite(terms["-d<B_sys>"]):
            try:
                b_env = _minus_log(setup.reduced(env))
                corr = b_tot.matrix - embed(b_sys, setup.layout, [s]) - embed(b_env, setup.layout, env)
                extra["d<B_corr>"] = expectation(rho_f, corr) - expectation(rho0, corr)
                extra["<B_corr>_0"] = expectation(rho0, corr)
                extra["d<B_env>"] = expectation(setup.reduced(env, rho_f), b_env) - expectation(setup.reduced(env), b_env)
            except RankDeficiencyError:
                pass
    return _make("cci", terms, reason=reason, note=note, extra=extra, provenance={
        "d<B_tot>": "change of <-ln rho0_tot>", "-d<B_sys>": "minus change of <-ln rho0_sys>"})


def cci_coupled_gibbs(setup: PreparedSetup, final) -> InequalityReport:
    """Coupled-Gibbs CCI split into bare heat, interaction and dressing terms."""
    rho_f, _ = _unpack(final)
    info = setup.coupled
    if info is None:
        return _make("cci_coupled_gibbs", {}, reason="preparation_mismatch",
                     note="setup was not built as a coupled Gibbs preparation")
    rho0 = setup.rho0
    terms = {"dS_sys": _delta_entropy(setup, rho_f, info.system)}
    if info.cold is not None:
        terms["beta_c*q_c"] = info.beta_c * _delta_local(setup, rho_f, info.cold,
                                                        setup.local_hamiltonians[info.cold])
    terms["beta_h*q_h"] = info.beta_h * _delta_local(setup, rho_f, info.hot, setup.local_hamiltonians[info.hot])
    terms["beta_h*d<H_int0>"] = info.beta_h * (expectation(rho_f, setup.h_int0) - expectation(rho0, setup.h_int0))
    reason, note = None, ""
    try:
        h_eff = effective_hamiltonian(setup)
        dressing = setup.local_hamiltonians[info.system] - h_eff
        terms["beta_h*d<H_s-H_eff>"] = info.beta_h * _delta_local(setup, rho_f, info.system, dressing)
    except RankDeficiencyError:
        terms["beta_h*d<H_s-H_eff>"] = math.nan
        reason, note = "rank_deficient", "reduced system state is not full rank"
    generic = cci(setup, final)
    extra = {"cci_total": generic.lhs_total}
    if math.isfinite(generic.lhs_total):
        extra["decomposition_residual"] = float(sum(terms.values())) - generic.lhs_total
    return _make("cci_coupled_gibbs", terms, reason=reason or generic.reason,
                 note=note or generic.applicability_note, extra=extra)


def passive_ci(setup: PreparedSetup, final) -> InequalityReport:
    """System entropy change plus beta-weighted passive-energy changes of the baths."""
    rho_f, led = _unpack(final)
    terms = {}
    s = setup.system_label
    if s is not None:
        terms["dS_sys"] = _delta_entropy(setup, rho_f, s)
    extra = {}
    for k in setup.bath_labels:
        h = setup.local_hamiltonians[k]
        d_pass = passive_energy(setup.reduced(k, rho_f), h) - passive_energy(setup.reduced(k), h)
        terms[f"beta*dE_pass[{k}]"] = setup.beta(k) * d_pass
        extra[f"beta*q[{k}]"] = setup.beta(k) * _delta_local(setup, rho_f, k, h)
    reason, note = (None, "")
    if setup.correlated:
        reason, note = "correlated_preparation", "initial state is correlated"
    elif led is not None and not led.bath_hamiltonians_restored:
        reason, note = "bath_hamiltonian_modified", "a bath Hamiltonian differs at the end of the protocol"
    return _make("passive_ci", terms, reason=reason, note=note, extra=extra)


def alpha_family(setup: PreparedSetup, final, alphas: Iterable[float] = DEFAULT_ALPHAS, *,
                 regularize: bool = False) -> list[InequalityReport]:
    """One report per alpha: ``d<(-ln rho0_tot)^alpha> >= 0``."""
    rho_f, _ = _unpack(final)
    out = []
    for a in alphas:
        name = f"alpha[{a:g}]"
        try:
            b = global_passivity_operator(setup.rho0, a, regularize=regularize)
        except RankDeficiencyError:
            out.append(_make(name, {"d<B^alpha>": math.nan}, reason="rank_deficient",
                             note="initial global state is not full rank"))
            continue
        note = "epsilon-regularized initial state" if b.regularized else ""
        out.append(_make(name, {"d<B^alpha>": b.change(rho_f)}, note=note,
                         extra={"alpha": float(a)}))
    return out


def passivity_divergence(setup: PreparedSetup, final) -> InequalityReport:
    """``d<B_tot>`` bounded below by ``D(rho_f | rho0)``."""
    rho_f, _ = _unpack(final)
    b_tot, bad = _b_tot(setup)
    reason, note = bad or (None, "")
    d_b = (expectation(rho_f, b_tot) - expectation(setup.rho0, b_tot)) if b_tot is not None else math.nan
    extra = {}
    s = setup.system_label
    if s is not None:
        extra["D_sys"] = relative_entropy(setup.reduced(s, rho_f), setup.reduced(s))
    return _make("passivity_divergence", {"d<B_tot>": d_b},
                 rhs_terms={"D_tot": relative_entropy(rho_f, setup.rho0)},
                 reason=reason, note=note, extra=extra)


# ---------------------------------------------------------------------------
# protocol-level bounds
# ---------------------------------------------------------------------------

def _single_beta(setup: PreparedSetup, led: AccountingLedger, beta: float | None):
    betas = {setup.beta(k) for k in setup.bath_labels} | set(led.external_betas)
    if beta is not None:
        betas.add(float(beta))
    if len(betas) != 1:
        return None, ("multiple_temperatures" if betas else "no_bath")
    return betas.pop(), None


def free_energy_bound(setup: PreparedSetup, led: AccountingLedger, beta: float | None = None) -> InequalityReport:
    """Extracted work bounded by the drop of ``<H_s> - T S_sys``."""
    if not isinstance(led, AccountingLedger):
        raise TypeError("free_energy_bound needs the AccountingLedger of the protocol")
    s = setup.system_label
    if s is None:
        return _make("free_energy_bound", {}, reason="no_system", note="setup has no system factor")
    b, why = _single_beta(setup, led, beta)
    reason, note = None, ""
    if why:
        reason, note = why, "the bound needs exactly one bath temperature"
        b = beta if beta is not None else math.nan
    elif not led.split_available:
        reason, note = "split_unavailable", "a step drives the system while it is coupled"
    elif np.any(setup.h_int0.matrix):
        reason, note = "interaction_at_endpoints", "initial or final interaction energy is present"
    t = 1.0 / b
    ds = _delta_entropy(setup, led.final_state, s)
    terms = {"-d<H_s>": -led.delta_h_sys, "T*dS_sys": t * ds}
    return _make("free_energy_bound", terms, rhs_terms={"W": led.work}, reason=reason, note=note,
                 extra={"work_on_system": led.work_on_system, "heat": led.heat, "T": t})


def clausius_isochore(setup: PreparedSetup, led: AccountingLedger, beta: float | None = None) -> InequalityReport:
    """``dS_sys - beta Q >= 0`` with ``Q`` the heat into the system over isochores."""
    if not isinstance(led, AccountingLedger):
        raise TypeError("clausius_isochore needs the AccountingLedger of the protocol")
    s = setup.system_label
    if s is None:
        return _make("clausius_isochore", {}, reason="no_system", note="setup has no system factor")
    b, why = _single_beta(setup, led, beta)
    reason, note = None, ""
    if why:
        reason, note = why, "the isochore form needs exactly one bath temperature"
        b = beta if beta is not None else math.nan
    elif not led.split_available:
        reason, note = "split_unavailable", "a step drives the system while it is coupled"
    terms = {"dS_sys": _delta_entropy(setup, led.final_state, s), "-beta*Q": -b * led.heat}
    return _make("clausius_isochore", terms, reason=reason, note=note)


class KACoherenceWork(NamedTuple):
    delta_s: float  # S(dephased) - S(rho)
    w_rev: float
    delta_s_divergence: float  # D(rho | dephased)


def energy_dephasing(rho: DensityMatrix, h: HermitianOperator) -> DensityMatrix:
    """Pinch ``rho`` onto the eigenspaces of ``h``."""
    mu, v = h.spectrum.ascending()
    tol = get_tolerances().tol_herm * max(1.0, float(np.max(np.abs(mu))))
    out = np.zeros_like(rho.matrix)
    start = 0
    for k in range(1, mu.size + 1):
        if k == mu.size or mu[k] - mu[start] > tol:
            p = v[:, start:k] @ v[:, start:k].conj().T
            out = out + p @ rho.matrix @ p
            start = k
    return DensityMatrix(out)


def ka_coherence_work(rho_i: DensityMatrix, h_s: HermitianOperator, temperature: float) -> KACoherenceWork:
    """Entropy gained by dephasing in the energy basis and the reversible work it is worth."""
    diag = energy_dephasing(rho_i, h_s)
    ds = vn_entropy(diag) - vn_entropy(rho_i)
    dd = relative_entropy(rho_i, diag)
    return KACoherenceWork(ds, temperature * ds, dd)


def _dilation_m(ch: QuantumChannel, adjoint: bool) -> np.ndarray:
    u = ch.unitary.matrix
    if adjoint:
        u = u.conj().T
    big = np.kron(ch.env_state.matrix, np.eye(ch.input_dim))
    return partial_trace(u @ big @ u.conj().T, ch.dims, [1])


def bq_bound(rho0_sys: DensityMatrix, channel: QuantumChannel, beta: float) -> InequalityReport:
    """``beta q >= B_Q`` with ``B_Q = -ln tr(M rho0)`` and ``M = tr_E[U (rho_E (x) I) U^dagger]``.

    The verdict uses the unnormalized identity. ``extra`` also reports the
    normalized-identity value (``B_Q + ln d``) and the adjoint-dilation form.
    """
    d = channel.input_dim
    q = channel.env_energy_change(rho0_sys)
    vals = {}
    for key, adj in (("B_Q", False), ("B_Q_adjoint", True)):
        tr = expectation(rho0_sys, _dilation_m(channel, adj))
        vals[key] = -math.log(tr) if tr > 0 else math.nan
    reason, note = None, ""
    if not math.isfinite(vals["B_Q"]):
        reason, note = "nonpositive_trace", "tr(M rho0) is not positive"
    elif channel.env_hamiltonian is not None:
        thermal = gibbs_state(channel.env_hamiltonian, beta)
        if not thermal.allclose(channel.env_state, atol=get_tolerances().tol_recon):
            note = "environment is not Gibbs at the given beta"
    extra = {
        "B_Q_normalized": vals["B_Q"] + math.log(d) if math.isfinite(vals["B_Q"]) else math.nan,
        "B_Q_adjoint": vals["B_Q_adjoint"],
        "identity_trace": float(d),
        "q": q,
    }
    return _make("bq_bound", {"beta*q": beta * q}, rhs_terms={"B_Q": vals["B_Q"]},
                 reason=reason, note=note, extra=extra)


# ---------------------------------------------------------------------------
# demon detection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DemonVerdict:
    classification: str  # none_detected | ci_violation | alpha_violation
    alphas: tuple[float, ...] = ()
    minimal_violation: str | None = None
    slack: float | None = None


def demon_verdict(reports: Sequence[InequalityReport]) -> DemonVerdict:
    """Classify a protocol by which reports it violates.

    A violated Clausius report wins; otherwise violated alpha reports yield
    ``alpha_violation``. The named inequality is the violated one with the
    most negative slack in the winning class.
    """
    by_name = {r.name: r for r in reports}
    ci = [r for n, r in by_name.items() if n == "clausius"]
    alphas = [r for n, r in by_name.items() if n.startswith("alpha[")]
    if not ci or not alphas:
        raise ValueError("demon_verdict needs the clausius report and at least one alpha report")
    if ci[0].violated:
        return DemonVerdict("ci_violation", (), "clausius", ci[0].slack)
    bad = [r for r in alphas if r.violated]
    if bad:
        worst = min(bad, key=lambda r: r.slack)
        return DemonVerdict("alpha_violation", tuple(sorted(r.extra["alpha"] for r in bad)),
                            worst.name, worst.slack)
    return DemonVerdict("none_detected")


INEQUALITIES = {
    "entropic_form": entropic_form,
    "clausius": clausius,
    "clausius_strong": clausius_strong,
    "observable_ci": observable_ci,
    "ci_compact": ci_compact,
    "cci": cci,
    "cci_coupled_gibbs": cci_coupled_gibbs,
    "passive_ci": passive_ci,
    "alpha_family": alpha_family,
    "passivity_divergence": passivity_divergence,
    "free_energy_bound": free_energy_bound,
    "clausius_isochore": clausius_isochore,
}


def evaluate(setup: PreparedSetup, led: AccountingLedger, names: Iterable[str],
             alphas: Iterable[float] = DEFAULT_ALPHAS) -> list[InequalityReport]:
    """Evaluate the named inequalities in order; ``alpha_family`` expands to one report per alpha."""
    out: list[InequalityReport] = []
    for name in names:
        if name not in INEQUALITIES:
            raise KeyError(f"unknown inequality {name!r}")
        if name == "alpha_family":
            out.extend(alpha_family(setup, led, alphas))
        else:
            out.append(INEQUALITIES[name](setup, led))
    return out
