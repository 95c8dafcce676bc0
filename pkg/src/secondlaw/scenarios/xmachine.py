"""X machines: minimise a target observable over all global unitaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..config import get_tolerances
from ..errors import DimensionGuardError, DimensionMismatchError
from ..passivity import passive_rearrangement
from ..qcore import HermitianOperator, UnitaryOperator
from ..sampling import haar_unitaries
from ..setups import PreparedSetup


@dataclass(frozen=True)
class XMachineTask:
    target: HermitianOperator
    resource: PreparedSetup

    def __post_init__(self):
        if not isinstance(self.target, HermitianOperator):
            object.__setattr__(self, "target", HermitianOperator(self.target))
        if self.target.dim != self.resource.layout.total_dim:
            raise DimensionMismatchError(
                f"target dim {self.target.dim} != setup dim {self.resource.layout.total_dim}")


@dataclass(frozen=True)
class XMachineResult:
    value: float
    unitary: UnitaryOperator
    initial_value: float


def xmachine_optimum(task: XMachineTask) -> XMachineResult:
    """Global minimum of ``tr[U rho0 U^dagger A]``: the passive value of ``rho0`` w.r.t. ``A``."""
    rho0 = task.resource.rho0
    if rho0.dim > get_tolerances().max_dim:
        raise DimensionGuardError(f"dim {rho0.dim} exceeds max_dim")
    dec = passive_rearrangement(rho0, task.target)
    initial = dec.passive_energy + dec.ergotropy
    return XMachineResult(dec.passive_energy, dec.extracting_unitary, initial)


def random_search(task: XMachineTask, samples: int, rng=None, chunk: int = 4096) -> float:
    """Smallest ``tr[U rho0 U^dagger A]`` over ``samples`` Haar-random unitaries.

    Works in the joint eigenbases, where the objective only needs the squared
    moduli of the rotated unitary; Haar measure is invariant under that change.
    """
    rng = np.random.default_rng(rng)
    lam = np.ascontiguousarray(task.resource.rho0.probabilities)
    mu = np.ascontiguousarray(task.target.spectrum.eigenvalues)
    d = lam.size
    best = np.inf
    left = samples
    while left > 0:
        n = min(chunk, left)
        w = haar_unitaries(n, d, rng)
        # out[b] = sum_ij lam_i |w_bij|^2 mu_j
        vals = _kernels.batched_energy(w, lam, mu)
        best = min(best, float(vals.min()))
        left -= n
    return best
