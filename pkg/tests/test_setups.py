import math

import numpy as np
import pytest

from secondlaw import (
    DensityMatrix,
    HermitianOperator,
    UnitaryOperator,
    build_coupled_gibbs_setup,
    build_product_setup,
    effective_hamiltonian,
    effective_temperature,
    expectation,
    gibbs_state,
    partial_trace,
    squeeze_microbath,
    swap_operator,
)
from secondlaw.errors import DimensionMismatchError, InvariantError
from secondlaw.layout import Factor, SetupLayout
from secondlaw.sampling import haar_unitary, random_hermitian

from conftest import P_EXCITED, P_GROUND, qubit_gibbs

SWAP2 = swap_operator(2)
H_Q = HermitianOperator.diag([0.0, 1.0])


def _coupled_layout(beta_h=1.0, beta_c=2.0, cold=True):
    fs = [Factor("h", 2, "microbath", beta_h), Factor("s", 2, "system")]
    if cold:
        fs.append(Factor("c", 2, "microbath", beta_c))
    return SetupLayout(fs)


def _expm_oracle(k):
    w, v = np.linalg.eigh(k)
    e = np.exp(-(w - w.min()))
    return (v * (e / e.sum())) @ v.conj().T


class TestLayout:
    def test_two_systems_rejected(self):
        with pytest.raises(InvariantError):
            SetupLayout([Factor("a", 2, "system"), Factor("b", 2, "system")])

    def test_microbath_needs_beta(self):
        with pytest.raises(InvariantError):
            Factor("b", 2, "microbath")

    def test_duplicate_labels(self):
        with pytest.raises(InvariantError):
            SetupLayout([Factor("b", 2, "microbath", 1.0), Factor("b", 2, "microbath", 2.0)])


class TestGibbs:
    def test_qubit(self):
        assert np.allclose(np.diag(qubit_gibbs(1.0).matrix).real, [P_GROUND, P_EXCITED], atol=1e-12)

    def test_cold_limit(self):
        rho = qubit_gibbs(50.0)
        assert rho.matrix[1, 1].real == pytest.approx(math.exp(-50) / (1 + math.exp(-50)), rel=1e-9)
        assert rho.matrix[1, 1].real < 1e-20

    def test_conjugation(self, rng):
        h = random_hermitian(3, rng)
        u = haar_unitary(3, rng).matrix
        a = gibbs_state(HermitianOperator(u @ h.matrix @ u.conj().T), 0.8).matrix
        b = u @ gibbs_state(h, 0.8).matrix @ u.conj().T
        assert np.allclose(a, b, atol=1e-12)

    @pytest.mark.parametrize("beta", [0.0, -1.0, math.inf, math.nan])
    def test_invalid_beta(self, beta):
        with pytest.raises(ValueError):
            gibbs_state(H_Q, beta)

    def test_huge_beta_no_overflow(self):
        rho = gibbs_state(HermitianOperator.diag([0.0, 1.0, 5.0]), 1e4)
        assert np.allclose(np.diag(rho.matrix).real, [1, 0, 0])


class TestProductSetup:
    def test_kronecker_order(self):
        layout = SetupLayout([Factor("s", 2, "system"), Factor("b", 2, "microbath", 1.0)])
        setup = build_product_setup(layout, DensityMatrix.pure([0, 1]), {"s": H_Q, "b": H_Q})
        assert np.allclose(np.diag(setup.rho0.matrix).real, [0, 0, P_GROUND, P_EXCITED], atol=1e-12)
        assert not setup.correlated

    def test_system_only(self):
        layout = SetupLayout([Factor("s", 2, "system")])
        rho = DensityMatrix.from_diag([0.3, 0.7])
        assert np.allclose(build_product_setup(layout, rho, {"s": H_Q}).rho0.matrix, rho.matrix)

    def test_baths_only(self):
        layout = SetupLayout([Factor("a", 2, "microbath", 2.0), Factor("b", 2, "microbath", 0.5)])
        setup = build_product_setup(layout, None, {"a": H_Q, "b": H_Q})
        want = np.kron(qubit_gibbs(2.0).matrix, qubit_gibbs(0.5).matrix)
        assert np.allclose(setup.rho0.matrix, want)
        assert setup.system_label is None

    def test_dimension_mismatch(self):
        layout = SetupLayout([Factor("s", 2, "system"), Factor("b", 3, "microbath", 1.0)])
        with pytest.raises(DimensionMismatchError):
            build_product_setup(layout, DensityMatrix.pure([1, 0]), {"s": H_Q, "b": H_Q})

    def test_missing_system_state(self):
        layout = SetupLayout([Factor("s", 2, "system"), Factor("b", 2, "microbath", 1.0)])
        with pytest.raises(ValueError):
            build_product_setup(layout, None, {"s": H_Q, "b": H_Q})


class TestCoupledGibbs:
    def test_decoupled_limit(self):
        setup = build_coupled_gibbs_setup(_coupled_layout(), H_Q, H_Q, np.zeros((4, 4)), H_Q, 1.0, 2.0)
        want = np.kron(np.kron(qubit_gibbs(1.0).matrix, qubit_gibbs(1.0).matrix), qubit_gibbs(2.0).matrix)
        assert np.allclose(setup.rho0.matrix, want, atol=1e-12)
        assert not setup.correlated

    def test_swap_coupling(self):
        setup = build_coupled_gibbs_setup(_coupled_layout(cold=False), H_Q, H_Q, 0.5 * SWAP2, cold=None)
        k = np.kron(H_Q.matrix, np.eye(2)) + np.kron(np.eye(2), H_Q.matrix) + 0.5 * SWAP2
        assert np.allclose(setup.rho0.matrix, _expm_oracle(k), atol=1e-12)
        assert not np.allclose(setup.system_state().matrix, qubit_gibbs(1.0).matrix, atol=1e-6)
        assert setup.correlated

    def test_beta_mismatch(self):
        with pytest.raises(ValueError):
            build_coupled_gibbs_setup(_coupled_layout(beta_h=2.0), H_Q, H_Q, 0.5 * SWAP2, H_Q, 1.0, 2.0)

    def test_effective_h_decoupled(self):
        setup = build_coupled_gibbs_setup(_coupled_layout(), H_Q, H_Q, np.zeros((4, 4)), H_Q, 1.0, 2.0)
        assert np.allclose(effective_hamiltonian(setup).matrix, H_Q.matrix, atol=1e-10)

    def test_effective_h_round_trip(self):
        setup = build_coupled_gibbs_setup(_coupled_layout(), H_Q, H_Q, 0.5 * SWAP2, H_Q, 1.0, 2.0)
        h_eff = effective_hamiltonian(setup)
        assert np.allclose(gibbs_state(h_eff, 1.0).matrix, setup.system_state().matrix, atol=1e-10)
        gap = np.ptp(np.linalg.eigvalsh(h_eff.matrix))
        assert abs(gap - 1.0) > 1e-3

    def test_effective_h_dephasing_is_diagonal(self):
        zz = np.kron(np.diag([1.0, -1.0]), np.diag([1.0, -1.0]))
        setup = build_coupled_gibbs_setup(_coupled_layout(), H_Q, H_Q, 0.7 * zz, H_Q, 1.0, 2.0)
        h_eff = effective_hamiltonian(setup).matrix
        assert abs(h_eff[0, 1]) < 1e-12
        # explicit 4x4: marginal of exp(-(H_h + H_s + g zz))
        g = 0.7
        w = [math.exp(-(a + b + g * (1 - 2 * a) * (1 - 2 * b))) for a in (0, 1) for b in (0, 1)]
        p_s1 = (w[1] + w[3]) / sum(w)
        assert h_eff[1, 1].real == pytest.approx(math.log((1 - p_s1) / p_s1), abs=1e-10)


class TestSqueezing:
    def test_identity(self, swap_setup):
        out = squeeze_microbath(swap_setup, "b", UnitaryOperator.identity(2))
        assert np.allclose(out.rho0.matrix, swap_setup.rho0.matrix)
        assert out.preparation == "squeezed"

    def test_rotation_raises_energy(self, swap_setup):
        c, s = math.cos(math.pi / 8), math.sin(math.pi / 8)
        ry = UnitaryOperator([[c, -s], [s, c]])  # Bloch rotation by pi/4
        out = squeeze_microbath(swap_setup, "b", ry)
        e = expectation(out.reduced("b"), H_Q)
        assert e > P_EXCITED
        assert e == pytest.approx((1 - math.cos(math.pi / 4) * (P_GROUND - P_EXCITED)) / 2, abs=1e-12)

    def test_rejects_system(self, swap_setup):
        with pytest.raises(ValueError):
            squeeze_microbath(swap_setup, "s", UnitaryOperator.identity(2))


class TestEffectiveTemperature:
    def test_gibbs_fixed_point(self):
        assert effective_temperature(qubit_gibbs(1.0), H_Q) == pytest.approx(1.0, abs=1e-8)

    def test_rotated_basis(self, rng):
        u = haar_unitary(2, rng).matrix
        rho = DensityMatrix(u @ qubit_gibbs(1.0).matrix @ u.conj().T)
        assert effective_temperature(rho, H_Q) == pytest.approx(1.0, abs=1e-8)

    def test_pure_sentinel(self):
        assert effective_temperature(DensityMatrix.pure([1, 1]), H_Q) == math.inf

    def test_mixed_sentinel(self):
        assert effective_temperature(DensityMatrix.maximally_mixed(2), H_Q) == 0.0

    def test_trivial_hamiltonian(self):
        with pytest.raises(ValueError):
            effective_temperature(qubit_gibbs(1.0), HermitianOperator.identity(2))


def test_reduced_matches_partial_trace(swap_setup):
    assert np.allclose(swap_setup.reduced("b").matrix,
                       partial_trace(swap_setup.rho0, swap_setup.layout, ["b"]).matrix)
