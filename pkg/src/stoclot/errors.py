"""Exception types shared across the package.

The CLI maps these onto exit codes: infeasible demand -> 2, bad input -> 3,
resource exhaustion -> 4.
"""


class InputError(ValueError):
    """Malformed or inconsistent user input (unknown ids, bad ranges, ...)."""


class InfeasibleDemand(Exception):
    """The requested demand vector is not achievable by any k-lottery.

    Carries whatever certificate the detecting layer produced: the phase-1
    objective of the feasibility LP, or a combinatorial witness.
    """

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class SolverError(RuntimeError):
    """Numerical failure inside the LP solver (iteration cap, cycling)."""


class ResourceError(RuntimeError):
    """A configured memory/size cap was exceeded; retry with coarser settings."""
