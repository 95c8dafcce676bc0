"""Invariants over random setups, drawn through hypothesis-chosen seeds."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from secondlaw import (
    DensityMatrix,
    Quench,
    account,
    alpha_family,
    clausius,
    entropic_form,
    evolve,
    is_passive,
    partial_trace,
    passive_rearrangement,
    relative_entropy,
    vn_entropy,
)
from secondlaw.sampling import random_density_matrix, random_hermitian
from secondlaw.verification import random_coupled_setup, random_product_setup, random_protocol

seeds = st.integers(min_value=0, max_value=2**32 - 1)
PROPS = settings(max_examples=60, deadline=None)


def _case(seed):
    rng = np.random.default_rng(seed)
    setup = random_product_setup(rng, hi=24)
    return rng, setup, random_protocol(rng, setup.layout.total_dim)


@PROPS
@given(seeds)
def test_evolution_keeps_a_density_matrix(seed):
    _, setup, protocol = _case(seed)
    m = evolve(setup, protocol).matrix
    assert abs(np.trace(m) - 1) < 1e-10
    assert np.allclose(m, m.conj().T, atol=1e-12)
    assert np.linalg.eigvalsh(m).min() > -1e-10


@PROPS
@given(seeds)
def test_clausius_holds_for_products(seed):
    _, setup, protocol = _case(seed)
    assert clausius(setup, evolve(setup, protocol)).slack >= -1e-9


@PROPS
@given(seeds)
def test_entropic_form_subadditive(seed):
    _, setup, protocol = _case(seed)
    assert entropic_form(setup, evolve(setup, protocol)).slack >= -1e-9


@PROPS
@given(seeds)
def test_alpha_family_holds_for_unitary_mixtures(seed):
    rng = np.random.default_rng(seed)
    setup = random_product_setup(rng, hi=24, full_rank=True)
    final = evolve(setup, random_protocol(rng, setup.layout.total_dim))
    for r in alpha_family(setup, final, (0.5, 1.0, 2.0, 3.0)):
        assert r.slack >= -1e-8 * max(1.0, abs(r.lhs_total))


@PROPS
@given(seeds)
def test_energy_closure(seed):
    rng, setup, protocol = _case(seed)
    if setup.system_label is not None:
        d = setup.layout[setup.system_label].dim
        protocol = [Quench(random_hermitian(d, rng)), *protocol, Quench(random_hermitian(d, rng))]
    assert abs(account(setup, protocol).closure) < 1e-9


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_coupled_closure(seed):
    rng = np.random.default_rng(seed)
    setup = random_coupled_setup(rng)
    assert abs(account(setup, random_protocol(rng, setup.layout.total_dim)).closure) < 1e-9


@PROPS
@given(seeds, st.integers(min_value=2, max_value=6))
def test_passive_rearrangement_is_passive(seed, d):
    rng = np.random.default_rng(seed)
    rho, a = random_density_matrix(d, rng), random_hermitian(d, rng)
    dec = passive_rearrangement(rho, a)
    assert dec.ergotropy >= -1e-12
    assert is_passive(dec.rho_pass, a).passive
    assert math.isclose(vn_entropy(dec.rho_pass), vn_entropy(rho), abs_tol=1e-9)


@PROPS
@given(seeds, st.lists(st.integers(min_value=1, max_value=4), min_size=2, max_size=3))
def test_partial_trace_keeps_trace(seed, dims):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(math.prod(dims), rng)
    for keep in range(len(dims)):
        red = partial_trace(rho, dims, [keep])
        assert abs(np.trace(red.matrix) - 1) < 1e-12


@PROPS
@given(seeds, st.integers(min_value=1, max_value=5))
def test_relative_entropy_nonnegative(seed, d):
    rng = np.random.default_rng(seed)
    rho, sigma = random_density_matrix(d, rng), random_density_matrix(d, rng)
    assert relative_entropy(rho, sigma) >= -1e-10
    assert abs(relative_entropy(rho, rho)) < 1e-9
    pure, mixed = DensityMatrix.pure(np.eye(d)[0]), DensityMatrix(np.eye(d) / d)
    assert relative_entropy(pure, mixed) == pytest.approx(math.log(d), abs=1e-12)
