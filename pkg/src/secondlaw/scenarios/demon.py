"""Lazy Maxwell demons.

The demon measures the baths projectively in their product energy basis and
applies an outcome-conditioned unitary. This is the only non-unitary
primitive in the package; it stays here so that the core keeps its
mixture-of-unitaries contract.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from ..errors import DimensionMismatchError
from ..ledger import DEFAULT_ALPHAS, InequalityReport, alpha_family, clausius, demon_verdict
from ..qcore import DensityMatrix, UnitaryOperator
from ..setups import PreparedSetup


@dataclass(frozen=True)
class LazyDemon:
    """Awake with probability ``duty``: measure, then apply ``conditional[outcome]``.

    Asleep: the ``free`` exchange unitary acts instead. Outcome ``k`` labels
    the ``k``-th product energy eigenvector (local eigenvalues ascending).
    """

    free: UnitaryOperator
    conditional: Mapping[int, UnitaryOperator] = field(default_factory=dict)

    def basis(self, setup: PreparedSetup) -> np.ndarray:
        v = np.ones((1, 1), complex)
        for label in setup.layout.labels:
            h = setup.local_hamiltonians.get(label)
            if h is None:
                local = np.eye(setup.layout[label].dim, dtype=complex)
            else:
                local = h.spectrum.ascending()[1]
            v = np.kron(v, local)
        return v

    def awake(self, setup: PreparedSetup, rho: np.ndarray) -> np.ndarray:
        v = self.basis(setup)
        probs = np.einsum("ik,ij,jk->k", v.conj(), rho, v).real
        out = np.zeros_like(rho)
        for k, p in enumerate(probs):
            if p == 0.0:
                continue
            ket = v[:, k]
            u = self.conditional.get(k)
            if u is not None:
                ket = u.matrix @ ket
            out += p * np.outer(ket, ket.conj())
        return out

    def apply(self, setup: PreparedSetup, duty: float) -> DensityMatrix:
        if not 0.0 <= duty <= 1.0:
            raise ValueError(f"duty must lie in [0, 1], got {duty}")
        d = setup.layout.total_dim
        if self.free.dim != d or any(u.dim != d for u in self.conditional.values()):
            raise DimensionMismatchError("demon unitaries must act on the full setup")
        rho = setup.rho0.matrix
        f = self.free.matrix
        asleep = f @ rho @ f.conj().T
        return DensityMatrix(duty * self.awake(setup, rho) + (1.0 - duty) * asleep)


@dataclass(frozen=True)
class DemonPoint:
    duty: float
    reports: tuple[InequalityReport, ...]
    verdict: str
    alphas: tuple[float, ...]
    minimal_violation: str | None

    @property
    def clausius_slack(self) -> float:
        return self.reports[0].slack

    def slack(self, name: str) -> float:
        return next(r.slack for r in self.reports if r.name == name)


def run_lazy_demon_sweep(duty_grid: Iterable[float], setup: PreparedSetup, demon: LazyDemon,
                         alphas: Iterable[float] = DEFAULT_ALPHAS) -> list[DemonPoint]:
    """Clausius and alpha-family slacks with the demon verdict for every duty value."""
    alphas = tuple(alphas)
    out = []
    for duty in duty_grid:
        final = demon.apply(setup, float(duty))
        reports = (clausius(setup, final), *alpha_family(setup, final, alphas))
        v = demon_verdict(reports)
        out.append(DemonPoint(float(duty), reports, v.classification, v.alphas, v.minimal_violation))
    return out
