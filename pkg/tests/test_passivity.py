import math

import numpy as np
import pytest

from secondlaw import (
    DensityMatrix,
    ExplicitUnitary,
    HermitianOperator,
    UnitaryOperator,
    complete_passivity_check,
    ergotropy,
    expectation,
    global_passivity_operator,
    is_passive,
    passive_energy,
    passive_energy_change,
    passive_rearrangement,
    squeeze_microbath,
    swap_operator,
)
from secondlaw.errors import DimensionGuardError, RankDeficiencyError
from secondlaw.sampling import haar_unitaries, random_density_matrix, random_hermitian

from conftest import LN_Z1, P_EXCITED, P_GROUND, qubit_gibbs

H_Q = HermitianOperator.diag([0.0, 1.0])
H3 = HermitianOperator.diag([0.0, 1.0, 2.0])


def _brute_first_failure(p, e, n_max):
    """Exhaustive product-population check: sorted pairing versus the actual pairing."""
    pops, energies = np.array([1.0]), np.array([0.0])
    for n in range(1, n_max + 1):
        pops = np.kron(pops, p)
        energies = np.add.outer(energies, e).ravel()
        if pops @ energies - np.sort(pops)[::-1] @ np.sort(energies) > 1e-12:
            return n
    return None


class TestRearrangement:
    def test_already_passive(self):
        dec = passive_rearrangement(qubit_gibbs(1.0), H_Q)
        assert dec.ergotropy == 0.0
        assert np.allclose(dec.extracting_unitary.matrix, np.eye(2))

    def test_inverted_qubit(self):
        rho = DensityMatrix.from_diag([P_EXCITED, P_GROUND])
        dec = passive_rearrangement(rho, H_Q)
        assert np.allclose(dec.rho_pass.matrix, np.diag([P_GROUND, P_EXCITED]))
        assert dec.ergotropy == pytest.approx(0.4621171572600098, abs=1e-12)
        u = dec.extracting_unitary.matrix
        assert np.allclose(u @ rho.matrix @ u.conj().T, dec.rho_pass.matrix, atol=1e-12)

    def test_minimal_over_random_unitaries(self, rng):
        rho, a = random_density_matrix(4, rng), random_hermitian(4, rng)
        e_pass = passive_energy(rho, a)
        w = haar_unitaries(10_000, 4, rng)
        vals = np.einsum("bij,jk,blk,li->b", w, rho.matrix, w.conj(), a.matrix).real
        assert vals.min() >= e_pass - 1e-12

    def test_ergotropy_nonnegative(self, rng):
        for _ in range(50):
            assert ergotropy(random_density_matrix(3, rng), random_hermitian(3, rng)) >= 0


class TestIsPassive:
    def test_gibbs(self):
        assert is_passive(qubit_gibbs(0.7), H_Q).passive

    def test_inverted_witness(self):
        rho = DensityMatrix.from_diag([0.2, 0.8])
        chk = is_passive(rho, H_Q)
        assert not chk.passive
        w = chk.witness.matrix
        assert np.allclose(np.abs(w), [[0, 1], [1, 0]], atol=1e-12)
        assert expectation(DensityMatrix(w @ rho.matrix @ w.conj().T), H_Q) < expectation(rho, H_Q)

    def test_passive_not_thermal(self):
        assert is_passive(DensityMatrix.from_diag([0.5, 0.3, 0.2]), H3).passive

    def test_coherent_state_not_passive(self):
        chk = is_passive(DensityMatrix.pure([1, 1]), H_Q)
        assert not chk.passive and chk.witness is not None

    def test_witness_lowers_energy(self, rng):
        for _ in range(100):
            rho, a = random_density_matrix(4, rng), random_hermitian(4, rng)
            chk = is_passive(rho, a)
            if chk.passive:
                continue
            w = chk.witness.matrix
            assert expectation(DensityMatrix(w @ rho.matrix @ w.conj().T), a) < expectation(rho, a) - 1e-12


class TestCompletePassivity:
    def test_gibbs_passes(self):
        assert complete_passivity_check(qubit_gibbs(1.0), H_Q, 6).passed

    def test_pure_ground_passes(self):
        assert complete_passivity_check(DensityMatrix.from_diag([1, 0, 0]), H3, 8).passed

    def test_non_thermal_fails_late(self):
        p = np.array([0.5, 0.3, 0.2])
        res = complete_passivity_check(DensityMatrix.from_diag(p), H3, 10)
        assert res.first_failure == _brute_first_failure(p, np.array([0, 1, 2.0]), 10) == 9
        assert res.gaps[8] == pytest.approx(3.169987143891717e-07, rel=1e-6)
        assert res.gaps[0] == 0.0

    def test_non_thermal_fails_early(self):
        p = np.array([0.45, 0.3, 0.25])
        res = complete_passivity_check(DensityMatrix.from_diag(p), H3, 6)
        assert res.first_failure == 3
        assert res.gaps[2] == pytest.approx(0.0011249999999995985, rel=1e-9)

    def test_active_state_fails_at_one(self):
        assert complete_passivity_check(DensityMatrix.from_diag([0.2, 0.8]), H_Q, 3).first_failure == 1

    def test_guard(self):
        with pytest.raises(DimensionGuardError):
            complete_passivity_check(DensityMatrix.maximally_mixed(3), H3, 40)


class TestGlobalOperator:
    def test_alpha_one_is_log_of_product(self):
        rho = DensityMatrix(np.kron(qubit_gibbs(1.0).matrix, qubit_gibbs(2.0).matrix))
        b = global_passivity_operator(rho)
        h1, h2 = np.kron(H_Q.matrix, np.eye(2)), np.kron(np.eye(2), H_Q.matrix)
        lnz = math.log(1 + math.exp(-1)) + math.log(1 + math.exp(-2))
        assert np.allclose(b.matrix, 1.0 * h1 + 2.0 * h2 + lnz * np.eye(4), atol=1e-12)

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, 3.0])
    def test_maximally_mixed(self, alpha, rng):
        rho = DensityMatrix.maximally_mixed(3)
        b = global_passivity_operator(rho, alpha)
        assert np.allclose(b.matrix, math.log(3) ** alpha * np.eye(3))
        assert b.change(random_density_matrix(3, rng)) == pytest.approx(0.0, abs=1e-12)

    def test_alpha_two_qubit(self):
        b = global_passivity_operator(qubit_gibbs(1.0), 2.0)
        assert np.allclose(np.diag(b.matrix).real, [LN_Z1 ** 2, (1 + LN_Z1) ** 2], atol=1e-12)
        assert np.diag(b.matrix).real[0] == pytest.approx(0.0981328848667647, abs=1e-12)
        assert np.diag(b.matrix).real[1] == pytest.approx(1.7246562599032103, abs=1e-12)

    def test_rank_deficient(self):
        with pytest.raises(RankDeficiencyError):
            global_passivity_operator(DensityMatrix.from_diag([1, 0]))
        reg = global_passivity_operator(DensityMatrix.from_diag([1, 0]), regularize=True)
        assert reg.regularized

    def test_state_is_passive_for_its_operator(self, rng):
        for alpha in (0.5, 1.0, 2.0, 3.0):
            rho = random_density_matrix(4, rng)
            assert is_passive(rho, global_passivity_operator(rho, alpha).operator).passive


class TestPassiveEnergyChange:
    def test_identity(self, swap_setup):
        assert passive_energy_change(swap_setup, [], "b") == 0.0

    def test_squeezed_identity(self, swap_setup):
        c, s = math.cos(0.3), math.sin(0.3)
        sq = squeeze_microbath(swap_setup, "b", UnitaryOperator([[c, -s], [s, c]]))
        assert passive_energy_change(sq, [], "b") == pytest.approx(0.0, abs=1e-12)

    def test_swap(self, swap_setup):
        got = passive_energy_change(swap_setup, [ExplicitUnitary(swap_operator(2))], "b")
        assert got == pytest.approx(-P_EXCITED, abs=1e-12)

    def test_rejects_system(self, swap_setup):
        with pytest.raises(ValueError):
            passive_energy_change(swap_setup, [], "s")
