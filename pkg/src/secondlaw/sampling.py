"""Seeded random states, observables and unitaries for property testing."""

from __future__ import annotations

import numpy as np

from .qcore import DensityMatrix, HermitianOperator, UnitaryOperator


def _rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def haar_unitaries(n: int, dim: int, rng=None) -> np.ndarray:
    """Stack of ``n`` Haar-random unitaries, shape ``(n, dim, dim)``.

    QR of complex Ginibre matrices with the phases of ``diag(R)`` folded back
    into Q, which makes the distribution exactly invariant.
    """
    rng = _rng(rng)
    z = (rng.standard_normal((n, dim, dim)) + 1j * rng.standard_normal((n, dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=1, axis2=2)
    return q * (d / np.abs(d))[:, None, :]


def haar_unitary(dim: int, rng=None) -> UnitaryOperator:
    return UnitaryOperator(haar_unitaries(1, dim, rng)[0])


def random_hermitian(dim: int, rng=None, scale: float = 1.0) -> HermitianOperator:
    rng = _rng(rng)
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return HermitianOperator(scale * (a + a.conj().T) / 2)


def random_density_matrix(dim: int, rng=None, rank: int | None = None) -> DensityMatrix:
    """Ginibre-ensemble state; full rank unless ``rank`` is given."""
    rng = _rng(rng)
    k = dim if rank is None else rank
    g = rng.standard_normal((dim, k)) + 1j * rng.standard_normal((dim, k))
    rho = g @ g.conj().T
    return DensityMatrix(rho / np.trace(rho).real)


def random_pure_state(dim: int, rng=None) -> DensityMatrix:
    return random_density_matrix(dim, rng, rank=1)


def random_probabilities(n: int, rng=None) -> np.ndarray:
    return _rng(rng).dirichlet(np.ones(n))
