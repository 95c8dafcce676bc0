import math

import numpy as np
import pytest

from secondlaw import DensityMatrix, HermitianOperator, gibbs_state
from secondlaw.layout import Factor, SetupLayout
from secondlaw.setups import build_product_setup

# Closed forms for a qubit with gap 1 at beta = 1, evaluated independently of
# the package: Z = 1 + e^-1.
Z1 = 1.0 + math.exp(-1.0)
P_GROUND = 0.7310585786300049
P_EXCITED = 0.2689414213699951
S_GIBBS = 0.5822031088882179
LN_Z1 = 0.31326168751822286


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def qubit_h():
    return HermitianOperator.diag([0.0, 1.0])


@pytest.fixture
def swap_setup(qubit_h):
    """Ground-state system qubit beside a beta = 1 qubit microbath."""
    layout = SetupLayout([Factor("s", 2, "system"), Factor("b", 2, "microbath", 1.0)])
    return build_product_setup(layout, DensityMatrix.pure([1, 0]), {"s": qubit_h, "b": qubit_h})


def qubit_gibbs(beta: float = 1.0) -> DensityMatrix:
    return gibbs_state(HermitianOperator.diag([0.0, 1.0]), beta)
