"""Hot inner loops, compiled with numba when available.

Every kernel exists twice: a loop implementation that numba compiles with
``@njit`` and a vectorised pure-numpy implementation. The active set is
chosen once at import time. Set ``SECONDLAW_DISABLE_NUMBA=1`` to force the
numpy path (also used automatically when numba is not importable).
"""

from __future__ import annotations

import math
import os
from types import SimpleNamespace

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is an optional accelerator
    numba = None

_DISABLED = os.environ.get("SECONDLAW_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}
HAS_NUMBA = numba is not None
USING_NUMBA = HAS_NUMBA and not _DISABLED


# ---------------------------------------------------------------------------
# pure numpy
# ---------------------------------------------------------------------------

def _shannon_entropy_np(p, cutoff):
    q = p[p > cutoff]
    return float(-np.sum(q * np.log(q)))


def _gibbs_entropy_np(energies, beta):
    x = -beta * (energies - energies.min())
    w = np.exp(x)
    z = w.sum()
    p = w / z
    # S = beta <E> + ln Z, evaluated on the shifted spectrum
    return float(-np.sum(p * x) + math.log(z))


def _batched_energy_np(w, mu, lam):
    return np.einsum("i,bij,j->b", mu, (w.real ** 2 + w.imag ** 2), lam)


def _passive_gap_np(pops, energies):
    srt = np.sort(pops)[::-1] @ np.sort(energies)
    return float(pops @ energies - srt)


def _best_pair_swap_np(r, mu, tol):
    d = mu.shape[0]
    i, j = np.triu_indices(d, 1)
    keep = mu[j] - mu[i] > tol
    if not np.any(keep):
        return -1, -1, 0.0
    i, j = i[keep], j[keep]
    rii, rjj = r[i, i].real, r[j, j].real
    off = np.abs(r[i, j])
    half = 0.5 * (rii + rjj)
    rmax = half + np.sqrt((0.5 * (rii - rjj)) ** 2 + off ** 2)
    delta = (mu[i] - mu[j]) * (rmax - rii)
    k = int(np.argmin(delta))
    return int(i[k]), int(j[k]), float(delta[k])


# ---------------------------------------------------------------------------
# loop versions (numba targets)
# ---------------------------------------------------------------------------

def _shannon_entropy_loop(p, cutoff):
    s = 0.0
    for k in range(p.shape[0]):
        x = p[k]
        if x > cutoff:
            s -= x * math.log(x)
    return s


def _gibbs_entropy_loop(energies, beta):
    e0 = energies[0]
    for k in range(energies.shape[0]):
        if energies[k] < e0:
            e0 = energies[k]
    z = 0.0
    mean = 0.0
    for k in range(energies.shape[0]):
        x = -beta * (energies[k] - e0)
        w = math.exp(x)
        z += w
        mean += w * x
    return -mean / z + math.log(z)


def _batched_energy_loop(w, mu, lam):
    nb, d, _ = w.shape
    out = np.empty(nb)
    for b in range(nb):
        acc = 0.0
        for i in range(d):
            row = 0.0
            for j in range(d):
                z = w[b, i, j]
                row += (z.real * z.real + z.imag * z.imag) * lam[j]
            acc += mu[i] * row
        out[b] = acc
    return out


def _passive_gap_loop(pops, energies):
    a = np.sort(pops)
    e = np.sort(energies)
    n = a.shape[0]
    direct = 0.0
    best = 0.0
    for k in range(n):
        direct += pops[k] * energies[k]
        best += a[n - 1 - k] * e[k]
    return direct - best


def _best_pair_swap_loop(r, mu, tol):
    d = mu.shape[0]
    bi, bj, bd = -1, -1, 0.0
    first = True
    for i in range(d):
        rii = r[i, i].real
        for j in range(i + 1, d):
            if mu[j] - mu[i] <= tol:
                continue
            rjj = r[j, j].real
            off = abs(r[i, j])
            half = 0.5 * (rii + rjj)
            rmax = half + math.sqrt((0.5 * (rii - rjj)) ** 2 + off * off)
            delta = (mu[i] - mu[j]) * (rmax - rii)
            if first or delta < bd:
                bi, bj, bd = i, j, delta
                first = False
    return bi, bj, bd


NUMPY_KERNELS = SimpleNamespace(
    name="numpy",
    shannon_entropy=_shannon_entropy_np,
    gibbs_entropy=_gibbs_entropy_np,
    batched_energy=_batched_energy_np,
    passive_gap=_passive_gap_np,
    best_pair_swap=_best_pair_swap_np,
)

if HAS_NUMBA:
    _jit = numba.njit(cache=True)
    NUMBA_KERNELS = SimpleNamespace(
        name="numba",
        shannon_entropy=_jit(_shannon_entropy_loop),
        gibbs_entropy=_jit(_gibbs_entropy_loop),
        batched_energy=_jit(_batched_energy_loop),
        passive_gap=_jit(_passive_gap_loop),
        best_pair_swap=_jit(_best_pair_swap_loop),
    )
else:  # pragma: no cover
    NUMBA_KERNELS = None

ACTIVE = NUMBA_KERNELS if USING_NUMBA else NUMPY_KERNELS


def shannon_entropy(p: np.ndarray, cutoff: float = 0.0) -> float:
    """-sum p ln p over entries above ``cutoff`` (0 ln 0 = 0)."""
    return float(ACTIVE.shannon_entropy(np.ascontiguousarray(p, dtype=np.float64), float(cutoff)))


def gibbs_entropy(energies: np.ndarray, beta: float) -> float:
    """Entropy of the Gibbs distribution over ``energies`` at inverse temperature ``beta``."""
    return float(ACTIVE.gibbs_entropy(np.ascontiguousarray(energies, dtype=np.float64), float(beta)))


def batched_energy(w: np.ndarray, mu: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """``out[b] = sum_ij mu_i |w[b,i,j]|^2 lam_j`` for a stack of unitaries ``w``."""
    return ACTIVE.batched_energy(
        np.ascontiguousarray(w, dtype=np.complex128),
        np.ascontiguousarray(mu, dtype=np.float64),
        np.ascontiguousarray(lam, dtype=np.float64),
    )


def passive_gap(pops: np.ndarray, energies: np.ndarray) -> float:
    """``<E>`` minus its minimum over all permutations of ``pops``."""
    return float(ACTIVE.passive_gap(
        np.ascontiguousarray(pops, dtype=np.float64),
        np.ascontiguousarray(energies, dtype=np.float64),
    ))


def best_pair_swap(r: np.ndarray, mu: np.ndarray, tol: float) -> tuple[int, int, float]:
    """Most energy-lowering two-level rotation of ``r`` (written in the eigenbasis of ``mu``).

    Returns ``(i, j, delta)`` with ``mu[i] < mu[j]``; ``delta <= 0`` is the change of
    ``sum_k mu_k r_kk`` achieved by rotating the (i, j) block to its sorted eigenbasis.
    ``(-1, -1, 0.0)`` when no pair has distinct eigenvalues.
    """
    i, j, d = ACTIVE.best_pair_swap(
        np.ascontiguousarray(r, dtype=np.complex128),
        np.ascontiguousarray(mu, dtype=np.float64),
        float(tol),
    )
    return int(i), int(j), float(d)
