"""Stochastic clustering lotteries.

Randomized center-type clustering with per-client guarantees: chance
coverage rounding, supplier lotteries with certified expected-distance
constants, multiplicative-weights expected-distance approximation,
determinization, and a numerical certifier for the lottery constants.
"""

from ._kernels import BACKEND as kernel_backend
from .core import DemandChance, DemandExpected, Instance
from .errors import (InfeasibleDemand, InputError, ResourceError,
                     SolverError)
from .rng import RandomSource

__version__ = "0.1.0"
__all__ = [
    "Instance", "DemandChance", "DemandExpected", "RandomSource",
    "InputError", "InfeasibleDemand", "SolverError", "ResourceError",
    "kernel_backend", "__version__",
]
