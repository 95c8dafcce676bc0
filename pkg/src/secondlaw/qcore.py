"""Dense linear algebra for finite-dimensional states and observables.

Operators wrap read-only complex ``numpy`` arrays. ``HermitianOperator`` is
symmetrised once on construction; ``DensityMatrix`` additionally checks unit
trace and positivity. ``DensityMatrix`` caches its eigendecomposition, so
entropies and logarithms of the same state never re-diagonalise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, reduce
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels
from .config import get_tolerances
from .errors import (
    DimensionGuardError,
    DimensionMismatchError,
    DomainError,
    InvariantError,
    SpectralError,
)
from .layout import SetupLayout, as_dims, resolve

__all__ = [
    "HermitianOperator",
    "DensityMatrix",
    "UnitaryOperator",
    "Spectrum",
    "tensor",
    "embed",
    "partial_trace",
    "spectral",
    "matrix_function",
    "log_on_support",
    "vn_entropy",
    "relative_entropy",
    "expectation",
    "covariance",
    "variance",
    "commutator_norm",
]


def _as_square(entries) -> np.ndarray:
    m = np.array(entries, dtype=np.complex128)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvariantError(f"expected a square matrix, got shape {m.shape}")
    return m


def _scale(m: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0


class _Operator:
    def __init__(self, entries):
        m = _as_square(entries)
        if m.shape[0] > get_tolerances().max_dim:
            raise DimensionGuardError(
                f"dimension {m.shape[0]} exceeds max_dim={get_tolerances().max_dim}"
            )
        m.setflags(write=False)
        self._m = m

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    @property
    def dim(self) -> int:
        return self._m.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self._m if dtype is None else self._m.astype(dtype)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim})"

    def allclose(self, other, atol: float = 1e-9) -> bool:
        return np.allclose(self._m, np.asarray(other), atol=atol, rtol=0)


class HermitianOperator(_Operator):
    """Hermitian matrix; stored exactly Hermitian after one symmetrisation."""

    def __init__(self, entries):
        m = _as_square(entries)
        tol = get_tolerances().tol_herm
        if np.max(np.abs(m - m.conj().T), initial=0.0) > tol * _scale(m):
            raise InvariantError("matrix is not Hermitian within tol_herm")
        super().__init__(0.5 * (m + m.conj().T))

    @classmethod
    def diag(cls, values: Iterable[float]) -> "HermitianOperator":
        return cls(np.diag(np.asarray(list(values), dtype=float)))

    @classmethod
    def identity(cls, dim: int) -> "HermitianOperator":
        return cls(np.eye(dim))

    @classmethod
    def zeros(cls, dim: int) -> "HermitianOperator":
        return cls(np.zeros((dim, dim)))

    @cached_property
    def spectrum(self) -> "Spectrum":
        return spectral(self)

    def _coerce(self, other):
        if isinstance(other, _Operator):
            if other.dim != self.dim:
                raise DimensionMismatchError(f"dims {self.dim} and {other.dim}")
            return other.matrix
        return np.asarray(other)

    def __add__(self, other):
        return HermitianOperator(self._m + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return HermitianOperator(self._m - self._coerce(other))

    def __rsub__(self, other):
        return HermitianOperator(self._coerce(other) - self._m)

    def __neg__(self):
        return HermitianOperator(-self._m)

    def __mul__(self, c):
        if not np.isscalar(c) or np.iscomplexobj(c):
            return NotImplemented
        return HermitianOperator(float(c) * self._m)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / float(c))


class DensityMatrix(HermitianOperator):
    """Unit-trace positive semidefinite operator."""

    def __init__(self, entries):
        super().__init__(entries)
        tol = get_tolerances()
        tr = np.trace(self._m).real
        if abs(tr - 1.0) > tol.tol_trace:
            raise InvariantError(f"trace {tr!r} differs from 1 beyond tol_trace")
        if self.spectrum.eigenvalues[-1] < -tol.tol_psd:
            raise InvariantError(
                f"minimum eigenvalue {self.spectrum.eigenvalues[-1]:.3e} below -tol_psd"
            )

    @classmethod
    def pure(cls, ket: Sequence[complex]) -> "DensityMatrix":
        v = np.asarray(ket, dtype=np.complex128).ravel()
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim) / dim)

    @classmethod
    def from_diag(cls, probs: Iterable[float]) -> "DensityMatrix":
        return cls(np.diag(np.asarray(list(probs), dtype=float)))

    @classmethod
    def mix(cls, weights: Sequence[float], states: Sequence["DensityMatrix"]) -> "DensityMatrix":
        acc = sum(w * s.matrix for w, s in zip(weights, states))
        return cls(acc)

    @cached_property
    def probabilities(self) -> np.ndarray:
        """Eigenvalues (descending), tiny negatives clipped and renormalised."""
        p = np.clip(self.spectrum.eigenvalues, 0.0, None)
        p = p / p.sum()
        p.setflags(write=False)
        return p

    @property
    def rank(self) -> int:
        return int(np.sum(self.probabilities > get_tolerances().eps_support))

    @property
    def is_full_rank(self) -> bool:
        return self.rank == self.dim

    def conjugate(self, u: "UnitaryOperator | np.ndarray") -> "DensityMatrix":
        m = np.asarray(u)
        return DensityMatrix(m @ self._m @ m.conj().T)


class UnitaryOperator(_Operator):
    def __init__(self, entries):
        m = _as_square(entries)
        err = np.linalg.norm(m.conj().T @ m - np.eye(m.shape[0]))
        if err > get_tolerances().tol_uni:
            raise InvariantError(f"U^dagger U deviates from identity by {err:.3e}")
        super().__init__(m)

    @classmethod
    def identity(cls, dim: int) -> "UnitaryOperator":
        return cls(np.eye(dim))

    @property
    def adjoint(self) -> "UnitaryOperator":
        return UnitaryOperator(self._m.conj().T)

    def __matmul__(self, other: "UnitaryOperator") -> "UnitaryOperator":
        return UnitaryOperator(self._m @ np.asarray(other))


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues in descending order with matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def ascending(self) -> tuple[np.ndarray, np.ndarray]:
        return self.eigenvalues[::-1], self.eigenvectors[:, ::-1]


# ---------------------------------------------------------------------------
# composition
# ---------------------------------------------------------------------------

def tensor(factors: Sequence[_Operator]) -> _Operator:
    """Kronecker product in the given order; all factors must share one kind."""
    factors = list(factors)
    if not factors:
        raise ValueError("tensor() needs at least one factor")
    kind = type(factors[0])
    if any(type(f) is not kind for f in factors):
        raise TypeError("tensor() factors must all be of the same kind")
    return kind(reduce(np.kron, (f.matrix for f in factors)))


def embed(op, layout: SetupLayout | Sequence[int], targets: Iterable[int | str]) -> np.ndarray:
    """Lift ``op`` acting on ``targets`` (in the given order) to the full space.

    Identities pad the remaining factors; the result follows layout order.
    Returns a raw array so callers choose the wrapper.
    """
    dims = as_dims(layout)
    targets = resolve(layout, targets)
    if len(set(targets)) != len(targets):
        raise ValueError("repeated target factor")
    m = np.asarray(op, dtype=np.complex128)
    d_t = math.prod(dims[t] for t in targets)
    if m.shape != (d_t, d_t):
        raise DimensionMismatchError(f"operator dim {m.shape[0]} != product of target dims {d_t}")
    n = len(dims)
    rest = [i for i in range(n) if i not in targets]
    order = targets + rest
    big = np.kron(m, np.eye(math.prod(dims[i] for i in rest)))
    if order == list(range(n)):
        return big
    shape = [dims[i] for i in order]
    inv = list(np.argsort(order))
    t = big.reshape(shape + shape).transpose(inv + [n + k for k in inv])
    total = math.prod(dims)
    return t.reshape(total, total)


def partial_trace(state: _Operator | np.ndarray, layout: SetupLayout | Sequence[int],
                  keep: Iterable[int | str]):
    """Trace out every factor not in ``keep``; kept factors stay in layout order."""
    dims = as_dims(layout)
    keep = sorted(set(resolve(layout, keep)))
    if not keep:
        raise ValueError("keep must be nonempty")
    m = np.asarray(state)
    total = math.prod(dims)
    if m.shape != (total, total):
        raise DimensionMismatchError(f"state dim {m.shape[0]} does not match layout dim {total}")
    n = len(dims)
    traced = [i for i in range(n) if i not in keep]
    dk = math.prod(dims[i] for i in keep)
    dt = math.prod(dims[i] for i in traced)
    order = keep + traced
    t = m.reshape(list(dims) * 2).transpose(order + [n + i for i in order])
    red = np.einsum("ajbj->ab", t.reshape(dk, dt, dk, dt))
    if isinstance(state, DensityMatrix):
        return DensityMatrix(red)
    if isinstance(state, HermitianOperator):
        return HermitianOperator(red)
    return red


# ---------------------------------------------------------------------------
# spectral calculus
# ---------------------------------------------------------------------------

def spectral(op: HermitianOperator) -> Spectrum:
    m = np.asarray(op)
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise SpectralError(f"eigensolver did not converge: {exc}") from exc
    w, v = w[::-1].copy(), v[:, ::-1].copy()
    w.setflags(write=False)
    v.setflags(write=False)
    spec = Spectrum(w, v)
    err = np.linalg.norm(spec.reconstruct() - m)
    if err > get_tolerances().tol_recon * max(1.0, float(np.linalg.norm(m))):
        raise SpectralError(f"eigendecomposition reconstruction error {err:.3e}")
    return spec


def _spectrum_of(op) -> Spectrum:
    if isinstance(op, HermitianOperator):
        return op.spectrum
    return spectral(HermitianOperator(op))


def matrix_function(op: HermitianOperator, f: Callable[[np.ndarray], np.ndarray], *,
                    on_support: bool = False) -> HermitianOperator:
    """Apply real scalar ``f`` to the spectrum of ``op``.

    With ``on_support=True``, eigenvalues below ``eps_support`` are treated as
    outside the support: ``f`` is not evaluated there and the result is zero on
    that subspace.
    """
    spec = _spectrum_of(op)
    lam = spec.eigenvalues
    mask = lam > get_tolerances().eps_support if on_support else np.ones(lam.shape, bool)
    vals = np.zeros_like(lam)
    with np.errstate(all="ignore"):
        vals[mask] = np.asarray(f(lam[mask]), dtype=float)
    if not np.all(np.isfinite(vals)):
        bad = lam[mask][~np.isfinite(vals[mask])]
        raise DomainError(f"function undefined at eigenvalue(s) {bad[:4]}")
    v = spec.eigenvectors
    return HermitianOperator((v * vals) @ v.conj().T)


def log_on_support(rho: HermitianOperator) -> HermitianOperator:
    return matrix_function(rho, np.log, on_support=True)


def vn_entropy(rho: DensityMatrix) -> float:
    """Von Neumann entropy in nats."""
    p = rho.probabilities
    s = _kernels.shannon_entropy(p, 0.0)
    return float(min(max(s, 0.0), math.log(rho.dim)))


def relative_entropy(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """D(rho|sigma) in nats; ``math.inf`` when supp(rho) is not inside supp(sigma)."""
    if rho.dim != sigma.dim:
        raise DimensionMismatchError(f"dims {rho.dim} and {sigma.dim}")
    tol = get_tolerances()
    p, v = rho.probabilities, rho.spectrum.eigenvectors
    q, w = sigma.probabilities, sigma.spectrum.eigenvectors
    overlap = np.abs(v.conj().T @ w) ** 2  # overlap[i, j] = |<v_i|w_j>|^2
    in_supp = q > tol.eps_support
    leak = float(p @ overlap[:, ~in_supp].sum(axis=1))
    if leak > tol.tol_psd:
        return math.inf
    logq = np.zeros_like(q)
    logq[in_supp] = np.log(q[in_supp])
    d = -_kernels.shannon_entropy(p, 0.0) - float(p @ overlap @ logq)
    return max(d, 0.0)


def expectation(rho: HermitianOperator | np.ndarray, a: HermitianOperator | np.ndarray) -> float:
    r, m = np.asarray(rho), np.asarray(a)
    if r.shape != m.shape:
        raise DimensionMismatchError(f"dims {r.shape[0]} and {m.shape[0]}")
    val = np.einsum("ij,ji->", r, m)
    if abs(val.imag) > get_tolerances().tol_herm * max(1.0, abs(val.real)):
        raise InvariantError(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def variance(rho: DensityMatrix, a) -> float:
    m = np.asarray(a)
    mean = expectation(rho, m)
    return max(expectation(rho, m @ m) - mean ** 2, 0.0)


def covariance(rho: DensityMatrix, a: HermitianOperator, i: int | str,
               b: HermitianOperator, j: int | str, layout: SetupLayout | Sequence[int]) -> float:
    """<AB> - <A><B> for A on factor ``i`` and B on a different factor ``j``."""
    i, j = resolve(layout, [i, j])
    if i == j:
        raise ValueError("covariance operators must act on disjoint factors")
    ea = embed(a, layout, [i])
    eb = embed(b, layout, [j])
    return expectation(rho, ea @ eb) - expectation(rho, ea) * expectation(rho, eb)


def commutator_norm(a, b) -> float:
    x, y = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm(x @ y - y @ x))
