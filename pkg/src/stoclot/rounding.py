"""Shared randomized subroutines: dependent rounding and greedy clustering.

Dependent rounding turns a fractional vector y in [0,1]^n into a random
subset Y with exact marginals Pr[i in Y] = y_i, cardinality always within
floor/ceil of sum(y), and the negative-correlation property
Pr[Y cap S = empty] <= prod_{i in S} (1 - y_i).
"""

import numpy as np

from . import _kernels
from .errors import InputError
from .rng import RandomSource, as_source

__all__ = ["dep_round", "dep_round_restricted", "dep_round_batch",
           "greedy_cluster", "uniforms_for_depround"]


def _validate_vector(y):
    y = np.ascontiguousarray(y, dtype=float)
    if y.ndim != 1:
        raise InputError("dep_round expects a 1-d vector")
    if ((y < -1e-12) | (y > 1 + 1e-12)).any():
        raise InputError("dep_round components must lie in [0, 1]")
    return np.clip(y, 0.0, 1.0)


def uniforms_for_depround(n, n_samples, gen):
    """Uniform budget: one draw per merge step plus one leftover Bernoulli."""
    return gen.random((n_samples, max(n, 1)))


def dep_round(y, rng):
    """One dependent-rounding draw; returns a boolean open mask."""
    return dep_round_batch(y, 1, rng)[0]


def dep_round_batch(y, n_samples, rng):
    """n_samples independent dependent-rounding draws as an (N, n) bool array."""
    y = _validate_vector(y)
    if isinstance(rng, (int, np.integer, RandomSource)):
        gen = as_source(rng).stream("dep_round")
    else:
        gen = rng
    uniforms = uniforms_for_depround(y.size, n_samples, gen)
    out = np.zeros((n_samples, y.size), dtype=np.uint8)
    _kernels.depround_batch(y, uniforms, out)
    return out.astype(bool)


def dep_round_restricted(y, subset, rng):
    """dep_round on y zeroed outside ``subset``; returns a boolean mask."""
    y = _validate_vector(y)
    masked = np.zeros_like(y)
    subset = np.asarray(list(subset), dtype=int)
    if subset.size:
        masked[subset] = y[subset]
    return dep_round(masked, rng)


def greedy_cluster(families, weights):
    """Greedy conflict-free client selection.

    Clients are scanned in order of increasing weight (ties by client index);
    a client joins the output when its facility set is disjoint from every
    facility set already selected.  Winners therefore have pairwise disjoint
    sets, and every client shares a facility with some winner of no larger
    weight.
    """
    weights = np.asarray(weights, dtype=float)
    n = len(families)
    if weights.size != n:
        raise InputError("one weight per client required")
    for j, f in enumerate(families):
        if len(f) == 0:
            raise InputError(f"empty facility set for client {j}")
    order = np.lexsort((np.arange(n), weights))
    used = set()
    winners = []
    for j in order:
        fam = set(int(i) for i in families[j])
        if not (fam & used):
            winners.append(int(j))
            used |= fam
    return winners
