"""Initial preparations: product-of-Gibbs and coupled system-bath Gibbs states."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np

from . import _kernels
from .config import get_tolerances
from .errors import DimensionMismatchError, RankDeficiencyError
from .layout import Factor, SetupLayout
from .qcore import (
    DensityMatrix,
    HermitianOperator,
    UnitaryOperator,
    embed,
    log_on_support,
    partial_trace,
    tensor,
    vn_entropy,
)

__all__ = [
    "Factor",
    "SetupLayout",
    "CoupledGibbsInfo",
    "PreparedSetup",
    "gibbs_state",
    "build_product_setup",
    "build_coupled_gibbs_setup",
    "effective_hamiltonian",
    "squeeze_microbath",
    "effective_temperature",
    "factorization_residual",
]


@dataclass(frozen=True)
class CoupledGibbsInfo:
    hot: str
    system: str
    cold: str | None
    beta_h: float
    beta_c: float | None
    h_int0_local: HermitianOperator  # acts on hot (x) system, in that order


@dataclass(frozen=True)
class PreparedSetup:
    layout: SetupLayout
    rho0: DensityMatrix
    local_hamiltonians: Mapping[str, HermitianOperator]
    hamiltonians: Mapping[str, HermitianOperator]  # embedded in the full space
    h_int0: HermitianOperator
    correlated: bool
    preparation: str = "product"
    squeezers: Mapping[str, UnitaryOperator] = field(default_factory=dict)
    coupled: CoupledGibbsInfo | None = None

    @property
    def system_label(self) -> str | None:
        i = self.layout.system_index
        return None if i is None else self.layout.labels[i]

    @property
    def bath_labels(self) -> list[str]:
        return [self.layout.labels[i] for i in self.layout.microbath_indices]

    def beta(self, label: str) -> float:
        return self.layout[label].beta

    def reduced(self, labels: str | Iterable[str], state: DensityMatrix | None = None) -> DensityMatrix:
        keep = [labels] if isinstance(labels, str) else list(labels)
        rho = self.rho0 if state is None else state
        if len(keep) == len(self.layout):
            return rho
        return partial_trace(rho, self.layout, keep)

    def system_state(self, state: DensityMatrix | None = None) -> DensityMatrix | None:
        s = self.system_label
        return None if s is None else self.reduced(s, state)

    def bare_hamiltonian(self) -> np.ndarray:
        d = self.layout.total_dim
        total = np.zeros((d, d), dtype=np.complex128)
        for h in self.hamiltonians.values():
            total = total + h.matrix
        return total


def gibbs_state(h: HermitianOperator, beta: float) -> DensityMatrix:
    """exp(-beta H) / Z, evaluated on the ground-shifted spectrum."""
    if not (isinstance(beta, (int, float)) and math.isfinite(beta) and beta > 0):
        raise ValueError(f"beta must be positive and finite, got {beta!r}")
    if not isinstance(h, HermitianOperator):
        h = HermitianOperator(h)
    e, v = h.spectrum.ascending()
    w = np.exp(-beta * (e - e[0]))
    p = w / w.sum()
    return DensityMatrix((v * p) @ v.conj().T)


def factorization_residual(rho: DensityMatrix, layout: SetupLayout) -> float:
    """Frobenius distance between ``rho`` and the product of its marginals."""
    if len(layout) == 1:
        return 0.0
    marginals = [partial_trace(rho, layout, [i]) for i in range(len(layout))]
    return float(np.linalg.norm(rho.matrix - tensor(marginals).matrix))


def _embed_all(layout: SetupLayout, local: Mapping[str, HermitianOperator]) -> dict[str, HermitianOperator]:
    out = {}
    for label, h in local.items():
        if h.dim != layout[label].dim:
            raise DimensionMismatchError(
                f"Hamiltonian for {label!r} has dim {h.dim}, factor has dim {layout[label].dim}"
            )
        out[label] = HermitianOperator(embed(h, layout, [label]))
    return out


def _coerce_h(h) -> HermitianOperator:
    return h if isinstance(h, HermitianOperator) else HermitianOperator(h)


def build_product_setup(layout: SetupLayout, system_state: DensityMatrix | None,
                        hamiltonians: Mapping[str, HermitianOperator]) -> PreparedSetup:
    """System state tensored with Gibbs states of every microbath, in layout order."""
    hamiltonians = {k: _coerce_h(v) for k, v in hamiltonians.items()}
    unknown = set(hamiltonians) - set(layout.labels)
    if unknown:
        raise KeyError(f"Hamiltonians given for unknown factors {sorted(unknown)}")
    pieces = []
    for f in layout.factors:
        if f.kind == "system":
            if system_state is None:
                raise ValueError(f"system factor {f.label!r} needs an initial state")
            if system_state.dim != f.dim:
                raise DimensionMismatchError(f"system state dim {system_state.dim} != {f.dim}")
            pieces.append(system_state)
        else:
            if f.label not in hamiltonians:
                raise ValueError(f"microbath {f.label!r} has no Hamiltonian")
            pieces.append(gibbs_state(hamiltonians[f.label], f.beta))
    if layout.system_index is None and system_state is not None:
        raise ValueError("layout has no system factor but a system state was given")
    rho0 = pieces[0] if len(pieces) == 1 else tensor(pieces)
    d = layout.total_dim
    return PreparedSetup(
        layout=layout,
        rho0=rho0,
        local_hamiltonians=dict(hamiltonians),
        hamiltonians=_embed_all(layout, hamiltonians),
        h_int0=HermitianOperator.zeros(d),
        correlated=False,
    )


def build_coupled_gibbs_setup(layout: SetupLayout, h_h, h_s, h_int0, h_c=None, beta_h: float = 1.0,
                              beta_c: float | None = None, *, hot: str = "h", system: str = "s",
                              cold: str | None = "c") -> PreparedSetup:
    """Hot bath and system jointly thermal at ``beta_h``; cold bath thermal at ``beta_c``.

    ``h_int0`` acts on hot (x) system in that order regardless of layout order.
    """
    h_h, h_s, h_int0 = _coerce_h(h_h), _coerce_h(h_s), _coerce_h(h_int0)
    expected = {hot, system} | ({cold} if cold else set())
    if set(layout.labels) != expected:
        raise ValueError(f"layout labels {layout.labels} must be exactly {sorted(expected)}")
    if layout[system].kind != "system" or layout[hot].kind != "microbath":
        raise ValueError("hot must be a microbath and system the system factor")
    if not math.isclose(layout[hot].beta, beta_h):
        raise ValueError(f"layout beta for {hot!r} differs from beta_h={beta_h}")
    local = {hot: h_h, system: h_s}
    if cold:
        if h_c is None or beta_c is None:
            raise ValueError("cold bath needs h_c and beta_c")
        if not math.isclose(layout[cold].beta, beta_c):
            raise ValueError(f"layout beta for {cold!r} differs from beta_c={beta_c}")
        local[cold] = _coerce_h(h_c)
    if h_int0.dim != layout[hot].dim * layout[system].dim:
        raise DimensionMismatchError("h_int0 must act on hot (x) system")
    emb = _embed_all(layout, local)
    hint = HermitianOperator(embed(h_int0, layout, [hot, system]))
    k = beta_h * (emb[hot].matrix + emb[system].matrix + hint.matrix)
    if cold:
        k = k + beta_c * emb[cold].matrix
    rho0 = gibbs_state(HermitianOperator(k), 1.0)
    correlated = factorization_residual(rho0, layout) > get_tolerances().tol_recon
    return PreparedSetup(
        layout=layout,
        rho0=rho0,
        local_hamiltonians=local,
        hamiltonians=emb,
        h_int0=hint,
        correlated=correlated,
        preparation="coupled_gibbs",
        coupled=CoupledGibbsInfo(hot, system, cold, float(beta_h),
                                 None if beta_c is None else float(beta_c), h_int0),
    )


def effective_hamiltonian(prepared: PreparedSetup, beta: float | None = None) -> HermitianOperator:
    """-(1/beta) ln rho0_sys, shifted so that its lowest eigenvalue is zero.

    ``beta`` defaults to the hot-bath temperature of a coupled preparation.
    """
    if beta is None:
        if prepared.coupled is None:
            raise ValueError("beta is required for setups not built by build_coupled_gibbs_setup")
        beta = prepared.coupled.beta_h
    rho_s = prepared.system_state()
    if rho_s is None:
        raise ValueError("setup has no system factor")
    if not rho_s.is_full_rank:
        raise RankDeficiencyError("reduced system state is rank deficient")
    h = log_on_support(rho_s) * (-1.0 / beta)
    shift = h.spectrum.eigenvalues[-1]
    return h - shift * np.eye(h.dim)


def squeeze_microbath(prepared: PreparedSetup, label: str, u_local: UnitaryOperator) -> PreparedSetup:
    """Apply a local unitary to one microbath of the initial state."""
    if label not in prepared.layout.labels or prepared.layout[label].kind != "microbath":
        raise ValueError(f"{label!r} is not a microbath")
    u = np.asarray(u_local)
    if u.shape[0] != prepared.layout[label].dim:
        raise DimensionMismatchError("squeezing unitary does not match the factor dimension")
    if not isinstance(u_local, UnitaryOperator):
        u_local = UnitaryOperator(u)
    big = embed(u, prepared.layout, [label])
    rho0 = DensityMatrix(big @ prepared.rho0.matrix @ big.conj().T)
    squeezers = dict(prepared.squeezers)
    squeezers[label] = u_local @ squeezers[label] if label in squeezers else u_local
    prep = prepared.preparation if prepared.preparation != "product" else "squeezed"
    return replace(prepared, rho0=rho0, squeezers=squeezers, preparation=prep)


def effective_temperature(rho: DensityMatrix, h: HermitianOperator,
                          bracket: tuple[float, float] = (1e-6, 1e6)) -> float:
    """Inverse temperature whose Gibbs state of ``h`` has the entropy of ``rho``.

    Returns ``math.inf`` when the target entropy is at or below the ground-state
    limit and ``0.0`` when it reaches ln(dim).
    """
    if rho.dim != h.dim:
        raise DimensionMismatchError(f"dims {rho.dim} and {h.dim}")
    tol = get_tolerances()
    target = vn_entropy(rho)
    energies = np.asarray(h.spectrum.eigenvalues, dtype=float)
    if np.ptp(energies) <= tol.tol_herm:
        raise ValueError("Hamiltonian is proportional to the identity; temperature undefined")
    s_of = lambda b: _kernels.gibbs_entropy(energies, b)  # noqa: E731
    lo, hi = bracket
    s_lo, s_hi = s_of(lo), s_of(hi)
    if not s_lo > s_hi:
        raise ArithmeticError("Gibbs entropy is not decreasing across the bracket")
    if target >= s_lo - tol.tol_root or target >= math.log(rho.dim) - tol.tol_root:
        return 0.0
    if target <= s_hi + tol.tol_root:
        return math.inf
    a, b = math.log(lo), math.log(hi)
    for _ in range(400):
        mid = 0.5 * (a + b)
        s_mid = s_of(math.exp(mid))
        if abs(s_mid - target) < tol.tol_root:
            break
        if s_mid > target:
            a = mid
        else:
            b = mid
    return math.exp(mid)
