"""Passive states, ergotropy, complete passivity and global-passivity operators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .config import get_tolerances
from .errors import DimensionGuardError, DimensionMismatchError, RankDeficiencyError
from .qcore import DensityMatrix, HermitianOperator, UnitaryOperator, expectation

__all__ = [
    "PassiveDecomposition",
    "PassivityCheck",
    "CompletePassivityResult",
    "GlobalPassivityOperator",
    "passive_rearrangement",
    "passive_energy",
    "ergotropy",
    "is_passive",
    "complete_passivity_check",
    "global_passivity_operator",
    "passive_energy_change",
    "VECTOR_DIM_LIMIT",
]

# product-space size up to which complete passivity is checked on population vectors
VECTOR_DIM_LIMIT = 1 << 20


@dataclass(frozen=True)
class PassiveDecomposition:
    rho_pass: DensityMatrix
    ergotropy: float
    passive_energy: float
    extracting_unitary: UnitaryOperator


@dataclass(frozen=True)
class PassivityCheck:
    passive: bool
    gap: float  # <A> minus its passive minimum
    witness: UnitaryOperator | None = None

    def __bool__(self) -> bool:
        return self.passive


@dataclass(frozen=True)
class CompletePassivityResult:
    first_failure: int | None
    gaps: tuple[float, ...]

    @property
    def passed(self) -> bool:
        return self.first_failure is None


@dataclass(frozen=True)
class GlobalPassivityOperator:
    operator: HermitianOperator
    source: DensityMatrix
    alpha: float
    regularized: bool = False

    @property
    def matrix(self) -> np.ndarray:
        return self.operator.matrix

    def expectation(self, rho: DensityMatrix) -> float:
        return expectation(rho, self.operator)

    def change(self, rho_f: DensityMatrix) -> float:
        """``<B>`` in ``rho_f`` minus ``<B>`` in the source state."""
        return expectation(rho_f, self.operator) - expectation(self.source, self.operator)


def _ascending_basis(a: HermitianOperator) -> tuple[np.ndarray, np.ndarray]:
    mu, v = a.spectrum.ascending()
    order = np.lexsort((np.arange(mu.size), mu))  # stable by (eigenvalue, index)
    return mu[order], v[:, order]


def _check_dims(rho, a):
    if rho.dim != a.dim:
        raise DimensionMismatchError(f"dims {rho.dim} and {a.dim}")


def passive_energy(rho: DensityMatrix, a: HermitianOperator) -> float:
    """Minimum of ``<A>`` over the unitary orbit of ``rho``."""
    _check_dims(rho, a)
    mu, _ = _ascending_basis(a)
    return float(rho.probabilities @ mu)


def ergotropy(rho: DensityMatrix, a: HermitianOperator) -> float:
    return max(expectation(rho, a) - passive_energy(rho, a), 0.0)


def passive_rearrangement(rho: DensityMatrix, a: HermitianOperator) -> PassiveDecomposition:
    """Pair descending populations of ``rho`` with ascending eigenvalues of ``a``."""
    _check_dims(rho, a)
    mu, va = _ascending_basis(a)
    lam, vr = rho.probabilities, rho.spectrum.eigenvectors
    e_pass = float(lam @ mu)
    e_now = expectation(rho, a)
    tol = get_tolerances()
    erg = e_now - e_pass
    if erg <= tol.tol_energy * max(1.0, abs(e_now)) and is_passive(rho, a).passive:
        return PassiveDecomposition(rho, max(erg, 0.0), e_pass, UnitaryOperator.identity(rho.dim))
    rho_pass = DensityMatrix((va * lam) @ va.conj().T)
    u = UnitaryOperator(va @ vr.conj().T)
    return PassiveDecomposition(rho_pass, max(erg, 0.0), e_pass, u)


def _degenerate_blocks(mu: np.ndarray, tol: float) -> list[slice]:
    blocks, start = [], 0
    for k in range(1, mu.size + 1):
        if k == mu.size or mu[k] - mu[start] > tol:
            blocks.append(slice(start, k))
            start = k
    return blocks


def is_passive(rho: DensityMatrix, a: HermitianOperator) -> PassivityCheck:
    """Passive iff ``<A>`` already sits at its unitary-orbit minimum.

    When it does not, the witness is the two-level rotation (in an
    eigenbasis of ``A`` that diagonalises ``rho`` inside degenerate blocks)
    that lowers ``<A>`` the most.
    """
    _check_dims(rho, a)
    tol = get_tolerances()
    mu, v = _ascending_basis(a)
    gap = expectation(rho, a) - float(rho.probabilities @ mu)
    scale = max(1.0, float(np.max(np.abs(mu), initial=0.0)))
    if gap <= tol.tol_energy * scale:
        return PassivityCheck(True, max(gap, 0.0))
    r = v.conj().T @ rho.matrix @ v
    for blk in _degenerate_blocks(mu, tol.tol_herm * scale):
        if blk.stop - blk.start > 1:
            w, x = np.linalg.eigh(r[blk, blk])
            x = x[:, ::-1]
            v[:, blk] = v[:, blk] @ x
    r = v.conj().T @ rho.matrix @ v
    i, j, _ = _kernels.best_pair_swap(r, mu, tol.tol_herm * scale)
    if i < 0:
        return PassivityCheck(False, gap)
    block = r[np.ix_([i, j], [i, j])]
    w, x = np.linalg.eigh(block)
    rot = np.eye(rho.dim, dtype=complex)
    # larger eigenvector -> |i> (lower level), smaller -> |j>
    rot[np.ix_([i, j], [i, j])] = x[:, ::-1].conj().T
    witness = UnitaryOperator(v @ rot @ v.conj().T)
    return PassivityCheck(False, gap, witness)


def complete_passivity_check(rho: DensityMatrix, h: HermitianOperator, n_max: int) -> CompletePassivityResult:
    """Passivity of ``rho^{(x)n}`` w.r.t. the summed local ``h`` for ``n = 1..n_max``.

    ``n = 1`` uses :func:`is_passive`. Once that holds, ``rho`` is diagonal in
    a common eigenbasis, so every power is checked on product population and
    energy vectors.
    """
    _check_dims(rho, h)
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    if rho.dim ** n_max > VECTOR_DIM_LIMIT:
        raise DimensionGuardError(
            f"dim {rho.dim}^{n_max} exceeds the product-space limit {VECTOR_DIM_LIMIT}")
    first = is_passive(rho, h)
    gaps = [first.gap]
    if not first.passive:
        return CompletePassivityResult(1, tuple(gaps))
    tol = get_tolerances().tol_energy
    mu, v = _ascending_basis(h)
    p1 = np.clip(np.real(np.einsum("ij,jk,ki->i", v.conj().T, rho.matrix, v)), 0.0, None)
    p1 = p1 / p1.sum()
    pops, energies = p1, mu
    for n in range(2, n_max + 1):
        pops = np.outer(pops, p1).ravel()
        energies = np.add.outer(energies, mu).ravel()
        gap = _kernels.passive_gap(pops, energies)
        gaps.append(gap)
        if gap > tol * max(1.0, n * float(np.max(np.abs(mu)))):
            return CompletePassivityResult(n, tuple(gaps))
    return CompletePassivityResult(None, tuple(gaps))


def global_passivity_operator(rho0: DensityMatrix, alpha: float = 1.0, *,
                              regularize: bool = False, epsilon: float = 1e-10) -> GlobalPassivityOperator:
    """``(-ln rho0)^alpha``; rank-deficient inputs are an error unless ``regularize``."""
    if not (math.isfinite(alpha) and alpha > 0):
        raise ValueError(f"alpha must be positive, got {alpha}")
    regularized = False
    if not rho0.is_full_rank:
        if not regularize:
            raise RankDeficiencyError(f"state has rank {rho0.rank} < {rho0.dim}")
        rho0 = DensityMatrix((1 - epsilon) * rho0.matrix + epsilon * np.eye(rho0.dim) / rho0.dim)
        regularized = True
    p = rho0.probabilities
    v = rho0.spectrum.eigenvectors
    vals = (-np.log(np.clip(p, np.finfo(float).tiny, None))).clip(0.0) ** alpha
    op = HermitianOperator((v * vals) @ v.conj().T)
    return GlobalPassivityOperator(op, rho0, float(alpha), regularized)


def passive_energy_change(setup, protocol_or_state, label: str) -> float:
    """Change of the passive energy of microbath ``label``.

    ``protocol_or_state`` is either a protocol (run with
    :func:`~secondlaw.evolution.evolve`) or the final global state.
    """
    from .evolution import evolve

    if label not in setup.bath_labels:
        raise ValueError(f"{label!r} is not a microbath")
    final = protocol_or_state if isinstance(protocol_or_state, DensityMatrix) else evolve(setup, protocol_or_state)
    h = setup.local_hamiltonians[label]
    return passive_energy(setup.reduced(label, final), h) - passive_energy(setup.reduced(label), h)

