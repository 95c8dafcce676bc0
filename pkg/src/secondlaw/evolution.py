"""Protocols, their unitaries and channels, and heat/work accounting.

A protocol is an ordered list of steps. ``Segment``, ``ExplicitUnitary`` and
``Mixture`` act on the whole setup as (mixtures of) unitaries. ``Quench``
changes a local Hamiltonian instantaneously without touching the state.
``ChannelStep`` couples one factor to a fresh environment through a dilation
and traces the environment out afterwards.

Accounting splits each step into an adiabat (system-local drive, counted as
work on the system) or an isochore (system Hamiltonian fixed, counted as
heat into the system). Steps that drive the system while it is coupled make
the split unavailable; bath energy changes are always reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from .config import get_tolerances
from .errors import DimensionMismatchError, InvariantError
from .qcore import (
    DensityMatrix,
    HermitianOperator,
    UnitaryOperator,
    embed,
    expectation,
    partial_trace,
    relative_entropy,
)
from .setups import PreparedSetup, gibbs_state

__all__ = [
    "Segment",
    "Quench",
    "ExplicitUnitary",
    "Mixture",
    "ChannelStep",
    "QuantumChannel",
    "SegmentRecord",
    "AccountingLedger",
    "FixedPointCheck",
    "compile_unitary",
    "flatten",
    "evolve",
    "account",
    "apply_channel",
    "check_fixed_point",
    "check_contractivity",
    "swap_thermalizer",
    "swap_operator",
    "stepwise_isotherm",
]


# ---------------------------------------------------------------------------
# steps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    """Evolution under a constant full-setup generator for ``duration``."""

    hamiltonian: HermitianOperator
    duration: float

    def __post_init__(self):
        if not isinstance(self.hamiltonian, HermitianOperator):
            object.__setattr__(self, "hamiltonian", HermitianOperator(self.hamiltonian))
        if not (math.isfinite(self.duration) and self.duration >= 0):
            raise ValueError(f"segment duration must be finite and non-negative, got {self.duration}")


@dataclass(frozen=True)
class Quench:
    """Instantaneous change of one local Hamiltonian (the system's by default)."""

    hamiltonian: HermitianOperator
    label: str | None = None

    def __post_init__(self):
        if not isinstance(self.hamiltonian, HermitianOperator):
            object.__setattr__(self, "hamiltonian", HermitianOperator(self.hamiltonian))


@dataclass(frozen=True)
class ExplicitUnitary:
    unitary: UnitaryOperator

    def __post_init__(self):
        if not isinstance(self.unitary, UnitaryOperator):
            object.__setattr__(self, "unitary", UnitaryOperator(self.unitary))


@dataclass(frozen=True)
class Mixture:
    """Classical mixture: branch ``k`` runs with probability ``p_k``."""

    branches: tuple

    def __init__(self, branches: Iterable):
        norm = []
        for p, steps in branches:
            if isinstance(steps, (Segment, ExplicitUnitary, Mixture)):
                steps = (steps,)
            steps = tuple(steps)
            for s in steps:
                if not isinstance(s, (Segment, ExplicitUnitary, Mixture)):
                    raise TypeError(f"mixture branches may only hold unitary steps, got {type(s).__name__}")
            norm.append((float(p), steps))
        if not norm:
            raise ValueError("mixture needs at least one branch")
        probs = np.array([p for p, _ in norm])
        if np.any(probs <= 0):
            raise InvariantError("mixture probabilities must be positive")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise InvariantError(f"mixture probabilities sum to {probs.sum()!r}, not 1")
        object.__setattr__(self, "branches", tuple(norm))


@dataclass(frozen=True)
class QuantumChannel:
    """``rho -> tr_env[U (env_state (x) rho) U^dagger]``; environment is the first factor."""

    env_state: DensityMatrix
    unitary: UnitaryOperator
    env_hamiltonian: HermitianOperator | None = None
    beta: float | None = None

    def __post_init__(self):
        if not isinstance(self.unitary, UnitaryOperator):
            object.__setattr__(self, "unitary", UnitaryOperator(self.unitary))
        d_env = self.env_state.dim
        if self.unitary.dim % d_env:
            raise DimensionMismatchError(
                f"dilation dim {self.unitary.dim} is not a multiple of env dim {d_env}"
            )
        if self.env_hamiltonian is not None and self.env_hamiltonian.dim != d_env:
            raise DimensionMismatchError("environment Hamiltonian does not match env_state")
        self._check_spanning()

    @property
    def input_dim(self) -> int:
        return self.unitary.dim // self.env_state.dim

    @property
    def dims(self) -> tuple[int, int]:
        return (self.env_state.dim, self.input_dim)

    def _raw(self, x: np.ndarray) -> np.ndarray:
        u = self.unitary.matrix
        big = np.kron(self.env_state.matrix, x)
        return partial_trace(u @ big @ u.conj().T, self.dims, [1])

    def _check_spanning(self) -> None:
        d = self.input_dim
        if d > 8:
            return
        tol = get_tolerances().tol_trace
        for i in range(d):
            for j in range(i, d):
                e = np.zeros((d, d), complex)
                e[i, j] = 1.0
                out = self._raw(e)
                if abs(np.trace(out) - (1.0 if i == j else 0.0)) > tol:
                    raise InvariantError("dilation does not preserve trace")
                if i != j:
                    adj = self._raw(e.T.copy())
                    if np.max(np.abs(adj - out.conj().T)) > tol:
                        raise InvariantError("dilation does not preserve Hermiticity")

    def __call__(self, rho: DensityMatrix) -> DensityMatrix:
        return apply_channel(rho, self)

    def env_energy_change(self, rho: DensityMatrix | np.ndarray) -> float:
        """Energy gained by the environment when the channel acts on ``rho``."""
        if self.env_hamiltonian is None:
            raise ValueError("channel has no environment Hamiltonian")
        u = self.unitary.matrix
        out = u @ np.kron(self.env_state.matrix, np.asarray(rho)) @ u.conj().T
        env_f = partial_trace(out, self.dims, [0])
        return expectation(env_f, self.env_hamiltonian) - expectation(self.env_state, self.env_hamiltonian)

    def is_energy_conserving(self, h_input: HermitianOperator) -> bool:
        if self.env_hamiltonian is None:
            return False
        h = np.kron(self.env_hamiltonian.matrix, np.eye(self.input_dim)) + np.kron(
            np.eye(self.env_state.dim), np.asarray(h_input))
        u = self.unitary.matrix
        return float(np.linalg.norm(u @ h - h @ u)) <= get_tolerances().tol_uni * max(1.0, np.linalg.norm(h))


@dataclass(frozen=True)
class ChannelStep:
    channel: QuantumChannel
    target: str | None = None  # defaults to the system factor


Step = Union[Segment, Quench, ExplicitUnitary, Mixture, ChannelStep]


# ---------------------------------------------------------------------------
# unitaries
# ---------------------------------------------------------------------------

class _Action:
    """A unitary stored densely, or as ``diag(exp(-i theta))`` for exact phase bookkeeping."""

    __slots__ = ("matrix", "theta")

    def __init__(self, matrix: np.ndarray | None = None, theta: np.ndarray | None = None):
        self.matrix = matrix
        self.theta = theta

    def dense(self) -> np.ndarray:
        return np.diag(np.exp(-1j * self.theta)) if self.matrix is None else self.matrix

    def then(self, later: "_Action") -> "_Action":
        if self.matrix is None and later.matrix is None:
            return _Action(theta=self.theta + later.theta)
        return _Action(matrix=later.dense() @ self.dense())

    def apply(self, rho: np.ndarray) -> np.ndarray:
        if self.matrix is None:
            return rho * np.exp(-1j * (self.theta[:, None] - self.theta[None, :]))
        u = self.matrix
        return u @ rho @ u.conj().T


def _segment_action(seg: Segment) -> _Action:
    h = seg.hamiltonian.matrix
    if not np.any(h - np.diag(np.diagonal(h))):
        return _Action(theta=np.diagonal(h).real * seg.duration)
    lam, v = seg.hamiltonian.spectrum.eigenvalues, seg.hamiltonian.spectrum.eigenvectors
    return _Action(matrix=(v * np.exp(-1j * lam * seg.duration)) @ v.conj().T)


def _identity_action(dim: int) -> _Action:
    return _Action(theta=np.zeros(dim))


def _step_dim(step) -> int | None:
    if isinstance(step, Segment):
        return step.hamiltonian.dim
    if isinstance(step, ExplicitUnitary):
        return step.unitary.dim
    if isinstance(step, Mixture):
        for _, steps in step.branches:
            for s in steps:
                d = _step_dim(s)
                if d is not None:
                    return d
    return None


def _branches(steps: Sequence, dim: int) -> list[tuple[float, _Action]]:
    out = [(1.0, _identity_action(dim))]
    for step in steps:
        if isinstance(step, Mixture):
            nxt = []
            for p, sub in step.branches:
                for q, act in _branches(sub, dim):
                    for w, base in out:
                        nxt.append((w * p * q, base.then(act)))
            out = nxt
            continue
        if isinstance(step, Segment):
            act = _segment_action(step)
        elif isinstance(step, ExplicitUnitary):
            act = _Action(matrix=step.unitary.matrix)
        else:
            raise TypeError(f"{type(step).__name__} cannot be part of a unitary branch")
        d = _step_dim(step)
        if d != dim:
            raise DimensionMismatchError(f"step dim {d} does not match setup dim {dim}")
        out = [(w, base.then(act)) for w, base in out]
    return out


def flatten(steps: Sequence, dim: int) -> list[tuple[float, np.ndarray]]:
    """Mixture-free list of ``(p_k, U_k)`` for a sequence of unitary steps."""
    return [(p, a.dense()) for p, a in _branches(steps, dim)]


def compile_unitary(protocol: Sequence, dim: int | None = None) -> UnitaryOperator:
    """Product of the step unitaries, later steps multiplying from the left.

    ``Quench`` steps do not act on the state and are skipped.
    """
    steps = [s for s in protocol if not isinstance(s, Quench)]
    for s in steps:
        if isinstance(s, (Mixture, ChannelStep)):
            raise TypeError(f"{type(s).__name__} has no single unitary")
    if dim is None:
        dims = [_step_dim(s) for s in steps]
        if not dims:
            raise ValueError("dim is required for an empty protocol")
        dim = dims[0]
    ((_, act),) = _branches(steps, dim)
    return UnitaryOperator(act.dense())


# ---------------------------------------------------------------------------
# channels
# ---------------------------------------------------------------------------

def apply_channel(rho: DensityMatrix, ch: QuantumChannel) -> DensityMatrix:
    if rho.dim != ch.input_dim:
        raise DimensionMismatchError(f"state dim {rho.dim} != channel input dim {ch.input_dim}")
    return DensityMatrix(ch._raw(rho.matrix))


def _apply_channel_embedded(state: np.ndarray, ch: QuantumChannel, dims: tuple[int, ...],
                            target: int) -> tuple[np.ndarray, float | None]:
    if dims[target] != ch.input_dim:
        raise DimensionMismatchError(
            f"channel input dim {ch.input_dim} != factor dim {dims[target]}")
    ext = (ch.env_state.dim,) + tuple(dims)
    u = embed(ch.unitary.matrix, ext, [0, target + 1])
    out = u @ np.kron(ch.env_state.matrix, state) @ u.conj().T
    new = partial_trace(out, ext, list(range(1, len(ext))))
    dq = None
    if ch.env_hamiltonian is not None:
        env_f = partial_trace(out, ext, [0])
        dq = expectation(env_f, ch.env_hamiltonian) - expectation(ch.env_state, ch.env_hamiltonian)
    return new, dq


@dataclass(frozen=True)
class FixedPointCheck:
    residual: float
    fixed: bool


def check_fixed_point(ch: QuantumChannel, candidate: DensityMatrix) -> FixedPointCheck:
    """Frobenius distance between ``M(candidate)`` and ``candidate``."""
    res = float(np.linalg.norm(apply_channel(candidate, ch).matrix - candidate.matrix))
    return FixedPointCheck(res, res < get_tolerances().tol_fp)


def check_contractivity(ch: QuantumChannel, rho: DensityMatrix, sigma: DensityMatrix) -> tuple[float, float]:
    return relative_entropy(rho, sigma), relative_entropy(apply_channel(rho, ch), apply_channel(sigma, ch))


def swap_operator(dim: int) -> np.ndarray:
    """SWAP on ``C^dim (x) C^dim``."""
    s = np.zeros((dim * dim, dim * dim))
    for i in range(dim):
        for j in range(dim):
            s[j * dim + i, i * dim + j] = 1.0
    return s


def swap_thermalizer(h: HermitianOperator, beta: float, angle: float = math.pi / 2) -> QuantumChannel:
    """Fresh Gibbs environment identical to the input, coupled by ``exp(-i angle SWAP)``.

    ``angle = pi/2`` is a full swap and thermalizes any input exactly.
    """
    d = h.dim
    u = math.cos(angle) * np.eye(d * d) - 1j * math.sin(angle) * swap_operator(d)
    return QuantumChannel(gibbs_state(h, beta), UnitaryOperator(u), h, beta)


# ---------------------------------------------------------------------------
# evolution and accounting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SegmentRecord:
    index: int
    step: str
    kind: str  # adiabat | isochore | quench | idle | environment | mixed
    system_energy_change: float
    work_in: float


@dataclass(frozen=True)
class AccountingLedger:
    q: dict[str, float]  # energy gained by each microbath
    heat: float  # heat into the system, summed over isochores
    work_on_system: float  # system-local driving work, summed over adiabats and quenches
    work: float  # work extracted by the external agent
    delta_h_sys: float
    delta_interaction: float
    q_external: float  # energy gained by fresh channel environments
    split_available: bool
    bath_hamiltonians_restored: bool
    segments: tuple[SegmentRecord, ...]
    final_state: DensityMatrix
    h_sys_initial: HermitianOperator | None = None
    h_sys_final: HermitianOperator | None = None
    external_betas: tuple[float, ...] = field(default=())

    @property
    def closure(self) -> float:
        """``W + dH_sys + sum q + dH_int + q_ext``; zero up to rounding."""
        return self.work + self.delta_h_sys + sum(self.q.values()) + self.delta_interaction + self.q_external


def _scale_tol(m: np.ndarray) -> float:
    return get_tolerances().tol_herm * max(1.0, float(np.max(np.abs(m)))) * m.shape[0]


class _Tracker:
    def __init__(self, setup: PreparedSetup):
        self.setup = setup
        self.layout = setup.layout
        self.h = dict(setup.local_hamiltonians)
        self.sys = setup.system_label

    def emb(self, label: str) -> np.ndarray:
        return embed(self.h[label], self.layout, [label])

    def bare(self) -> np.ndarray:
        d = self.layout.total_dim
        out = np.zeros((d, d), complex)
        for label in self.h:
            out = out + self.emb(label)
        return out

    def reference(self) -> np.ndarray:
        return self.bare() + self.setup.h_int0.matrix

    def sys_energy(self, state: np.ndarray) -> float:
        if self.sys is None or self.sys not in self.h:
            return 0.0
        return expectation(state, self.emb(self.sys))

    # -- classification ----------------------------------------------------
    def _split_local(self, m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``m`` = (system-local part) + (rest); system part via partial trace."""
        d_env = self.layout.total_dim // self.layout[self.sys].dim
        loc = partial_trace(m, self.layout, [self.sys]) / d_env
        return loc, m - embed(loc, self.layout, [self.sys])

    def classify(self, step) -> str:
        if self.sys is None:
            return "environment"
        if isinstance(step, Mixture):
            kinds = set()
            for _, steps in step.branches:
                kinds |= {self.classify(s) for s in steps}
            return _combine(kinds)
        single = len(self.layout) == 1
        if isinstance(step, Segment):
            h = step.hamiltonian.matrix
            if step.duration == 0:
                return "idle"
            resid = h - self.bare()
            tol = _scale_tol(h)
            loc, rest = (resid, np.zeros_like(resid)) if single else self._split_local(resid)
            loc = loc - np.trace(loc) / loc.shape[0] * np.eye(loc.shape[0])
            drive = np.max(np.abs(loc), initial=0.0) > tol
            coupled = np.max(np.abs(rest), initial=0.0) > tol
            if drive and coupled:
                return "mixed"
            return "adiabat" if drive else ("isochore" if coupled else "idle")
        u = step.unitary.matrix
        tol = get_tolerances().tol_uni * u.shape[0]
        if single:
            return "adiabat"
        loc, rest = self._split_local(u)
        if np.max(np.abs(rest)) <= tol:
            return "adiabat"
        env = [lab for lab in self.layout.labels if lab != self.sys]
        d_s = self.layout[self.sys].dim
        v = partial_trace(u, self.layout, env) / d_s
        if np.max(np.abs(u - embed(v, self.layout, env))) <= tol:
            return "environment"
        hb = self.bare()
        comm = np.linalg.norm(u @ hb - hb @ u)
        if comm <= get_tolerances().tol_uni * max(1.0, np.linalg.norm(hb)):
            return "isochore"
        return "mixed"


def _combine(kinds: set[str]) -> str:
    kinds = kinds - {"idle"}
    if not kinds:
        return "idle"
    if kinds <= {"environment"}:
        return "environment"
    if kinds <= {"isochore", "environment"}:
        return "isochore"
    if kinds == {"adiabat"}:
        return "adiabat"
    return "mixed"


def _run(setup: PreparedSetup, protocol: Sequence, with_ledger: bool):
    tr = _Tracker(setup)
    dim = setup.layout.total_dim
    state = setup.rho0.matrix
    records: list[SegmentRecord] = []
    heat = work_on = work_in = q_ext = 0.0
    split_ok = True
    ext_betas = []
    h_sys0 = tr.h.get(tr.sys) if tr.sys else None
    for idx, step in enumerate(protocol):
        name = type(step).__name__
        if isinstance(step, Quench):
            label = step.label or tr.sys
            if label is None:
                raise ValueError("no system factor to quench")
            if step.hamiltonian.dim != setup.layout[label].dim:
                raise DimensionMismatchError(f"quench Hamiltonian dim does not match factor {label!r}")
            old = tr.h.get(label, HermitianOperator.zeros(step.hamiltonian.dim))
            dw = expectation(state, embed(step.hamiltonian.matrix - old.matrix, tr.layout, [label])) \
                if with_ledger else 0.0
            tr.h[label] = step.hamiltonian
            work_in += dw
            if label == tr.sys:
                work_on += dw
            records.append(SegmentRecord(idx, name, "quench", dw if label == tr.sys else 0.0, dw))
            continue
        if with_ledger:
            e_ref0, e_s0 = expectation(state, tr.reference()), tr.sys_energy(state)
        if isinstance(step, ChannelStep):
            target = step.target or tr.sys
            if target is None:
                raise ValueError("channel step needs a target factor")
            state, dq = _apply_channel_embedded(state, step.channel, setup.layout.dims,
                                                setup.layout.index(target))
            kind = "isochore" if target == tr.sys else "environment"
            if step.channel.beta is not None:
                ext_betas.append(step.channel.beta)
        else:
            dq = None
            acts = _branches([step], dim)
            if len(acts) == 1:
                state = acts[0][1].apply(state)
            else:
                state = sum(p * a.apply(state) for p, a in acts)
            kind = tr.classify(step) if with_ledger else "idle"
        if not with_ledger:
            continue
        de_s = tr.sys_energy(state) - e_s0
        dw = expectation(state, tr.reference()) - e_ref0
        if dq is not None:
            q_ext += dq
            dw += dq
        work_in += dw
        if kind == "adiabat":
            work_on += de_s
        elif kind in ("isochore", "environment"):
            heat += de_s
        elif kind == "mixed":
            split_ok = False
        records.append(SegmentRecord(idx, name, kind, de_s, dw))
    final = DensityMatrix(state)
    if not with_ledger:
        return final
    rho0 = setup.rho0
    q = {}
    restored = True
    for label in setup.bath_labels:
        h0, hf = setup.local_hamiltonians[label], tr.h[label]
        if not hf.allclose(h0, atol=get_tolerances().tol_herm):
            restored = False
        q[label] = expectation(partial_trace(final, setup.layout, [label]), hf) - \
            expectation(partial_trace(rho0, setup.layout, [label]), h0)
    d_hs = 0.0
    h_sysf = tr.h.get(tr.sys) if tr.sys else None
    if h_sys0 is not None:
        d_hs = expectation(setup.system_state(final), h_sysf) - expectation(setup.system_state(), h_sys0)
    d_int = expectation(final, setup.h_int0) - expectation(rho0, setup.h_int0)
    return AccountingLedger(
        q=q,
        heat=heat,
        work_on_system=work_on,
        work=-work_in,
        delta_h_sys=d_hs,
        delta_interaction=d_int,
        q_external=q_ext,
        split_available=split_ok,
        bath_hamiltonians_restored=restored,
        segments=tuple(records),
        final_state=final,
        h_sys_initial=h_sys0,
        h_sys_final=h_sysf,
        external_betas=tuple(ext_betas),
    )


def evolve(setup: PreparedSetup, protocol: Sequence) -> DensityMatrix:
    """Final global state after running ``protocol`` on ``setup.rho0``."""
    return _run(setup, protocol, with_ledger=False)


def account(setup: PreparedSetup, protocol: Sequence) -> AccountingLedger:
    """Run ``protocol`` and book every energy change; see :class:`AccountingLedger`."""
    return _run(setup, protocol, with_ledger=True)


def _interpolate(path: Sequence[HermitianOperator], lam: float) -> HermitianOperator:
    if len(path) == 1:
        return path[0]
    x = lam * (len(path) - 1)
    k = min(int(math.floor(x)), len(path) - 2)
    t = x - k
    return HermitianOperator((1 - t) * path[k].matrix + t * path[k + 1].matrix)


def stepwise_isotherm(path: Sequence[HermitianOperator], beta: float, n: int,
                      bath: Callable[[HermitianOperator, float], QuantumChannel] | None = None,
                      target: str | None = None) -> list:
    """``n`` rounds of (quench to the next point of ``path``, thermalize at ``beta``).

    ``path`` is traversed piecewise linearly; the system is assumed to start
    at ``path[0]``. ``bath`` builds the isochore channel for each step and
    defaults to a full swap with a fresh Gibbs copy.
    """
    path = [p if isinstance(p, HermitianOperator) else HermitianOperator(p) for p in path]
    if not path:
        raise ValueError("isotherm path is empty")
    if n < 1:
        raise ValueError("need at least one step")
    bath = bath or swap_thermalizer
    steps: list = []
    for i in range(1, n + 1):
        h = _interpolate(path, i / n)
        steps.append(Quench(h, target))
        steps.append(ChannelStep(bath(h, beta), target))
    return steps
