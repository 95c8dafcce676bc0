"""Microscopic second-law inequalities for finite quantum setups.

Build a setup of a system and thermal microbaths, run a protocol of
unitaries, mixtures and channels on it, and check the resulting heat and
entropy bookkeeping against a family of Clausius-type inequalities.
"""

from .config import Tolerances, get_tolerances, set_tolerances, tolerances
from .errors import (
    DimensionGuardError,
    DimensionMismatchError,
    DomainError,
    InvariantError,
    RankDeficiencyError,
    ScenarioError,
    SecondLawError,
    SpectralError,
)
from .evolution import *  # noqa: F401,F403
from .evolution import __all__ as _evolution_all
from .ledger import *  # noqa: F401,F403
from .ledger import __all__ as _ledger_all
from .passivity import *  # noqa: F401,F403
from .passivity import __all__ as _passivity_all
from .qcore import *  # noqa: F401,F403
from .qcore import __all__ as _qcore_all
from .sampling import haar_unitaries, haar_unitary, random_density_matrix, random_hermitian, random_pure_state
from .setups import *  # noqa: F401,F403
from .setups import __all__ as _setups_all

__version__ = "0.1.0"

__all__ = sorted({
    *_qcore_all, *_setups_all, *_evolution_all, *_passivity_all, *_ledger_all,
    "Tolerances", "get_tolerances", "set_tolerances", "tolerances",
    "SecondLawError", "InvariantError", "DimensionMismatchError", "DomainError", "RankDeficiencyError",
    "SpectralError", "DimensionGuardError", "ScenarioError",
    "haar_unitaries", "haar_unitary", "random_density_matrix", "random_hermitian", "random_pure_state",
})
