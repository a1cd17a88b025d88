"""Converting expected-distance demands into single deterministic sets.

Three regimes for a demand vector t with some lottery achieving
E[d(j,S)] <= t_j:

* scale-free: |S| <= alpha*k with d(j,S) <= max(3, 2a/(a-1)) t_j
  (2a/(a-1) when clients and facilities coincide);
* logarithmic blowup: |S| <= 3k ln n / eps with d(j,S) <= (1+eps) t_j;
* exact budget: |S| <= k with d(j,S) <= (k+2) t_j, by a greedy loop whose
  overrun doubles as an infeasibility witness.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleDemand, InputError
from .lp import solve_expectation_lp, split_facilities
from .rng import as_source
from .rounding import dep_round, greedy_cluster

__all__ = ["Determinization", "InfeasibilityWitness", "determinize_scalefree",
           "determinize_logblowup", "determinize_exact_k"]


@dataclass
class Determinization:
    open_set: set
    alpha_achieved: float
    beta_achieved: float

    @classmethod
    def build(cls, instance, demand, open_set):
        s = set(int(i) for i in open_set)
        d = instance.service_distances(s)
        t = np.asarray(demand.t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(d <= 1e-15, 0.0, d / np.where(t > 0, t, np.nan))
        beta = float(np.nanmax(ratio)) if np.isfinite(ratio).any() else 0.0
        if ((t <= 0) & (d > 1e-15)).any():
            beta = math.inf
        return cls(s, len(s) / instance.k, beta)


@dataclass
class InfeasibilityWitness:
    """k+1 greedy picks whose scaled distances exceed any lottery's budget."""

    clients: list
    targets: list

    def __bool__(self):
        return False


def scalefree_beta(alpha, scc):
    if alpha <= 1:
        raise InputError("alpha must exceed 1")
    b = 2.0 * alpha / (alpha - 1.0)
    return b if scc else max(3.0, b)


def determinize_scalefree(instance, demand, alpha, lp_solution=None):
    """Greedy clustering over the expectation polytope.

    Per client the radius r_j is minimal with assignment mass 1/alpha inside
    B(j, r_j); clusters of opening mass exactly 1/alpha are split there, a
    conflict-free family is chosen greedily by theta(j) + r_j, and each
    winner opens its nearest facility.
    """
    if alpha <= 1:
        raise InputError("alpha must exceed 1")
    if lp_solution is None:
        res, assign = solve_expectation_lp(instance, demand)
        if not res.feasible:
            raise InfeasibleDemand("expectation polytope is empty",
                                   certificate=res.infeasibility)
        b, a = res.x, assign.a
    else:
        b, a = lp_solution
    nc = instance.n_clients
    theta = instance.thetas()
    radii = np.zeros(nc)
    for j in range(nc):
        order = np.lexsort((np.arange(instance.n_facilities),
                            instance.D[:, j]))
        acc = 0.0
        r_j = None
        for i in order:
            acc += a[i, j]
            if acc >= 1.0 / alpha - 1e-12:
                r_j = float(instance.D[i, j])
                break
        if r_j is None:
            raise InfeasibleDemand(f"assignment mass below 1/alpha for {j}")
        radii[j] = r_j
        cap = (alpha * demand.t[j] - theta[j]) / (alpha - 1.0)
        assert r_j <= cap + 1e-9, \
            f"cluster radius {r_j} exceeds the feasibility cap {cap}"
    family = split_facilities(
        instance, b, [(radii[j], 1.0 / alpha) for j in range(nc)],
        mode="shared", ensure_center=False)
    winners = greedy_cluster(family.clusters, theta + radii)
    # conflict-freeness caps the winner count at alpha*k
    assert len(winners) <= alpha * instance.k + 1e-9
    opened = {instance.nearest(z)[0] for z in winners}
    return Determinization.build(instance, demand, opened)


def determinize_logblowup(instance, demand, eps, rng, max_attempts=50,
                          lp_solution=None):
    """Dependent rounding of inflated openings, retried until the distance
    check passes.

    Opening probabilities are min(1, (2 ln n / eps) b_i); each attempt
    draws once and verifies d(j,S) <= (1+eps) t_j directly.
    """
    if not 0 < eps < 0.5:
        raise InputError("eps must lie in (0, 1/2)")
    if lp_solution is None:
        res, assign = solve_expectation_lp(instance, demand)
        if not res.feasible:
            raise InfeasibleDemand("expectation polytope is empty",
                                   certificate=res.infeasibility)
        b = res.x
    else:
        b = lp_solution[0]
    n = instance.n_points
    scale = 2.0 * math.log(max(n, 2)) / eps
    p = np.minimum(1.0, scale * np.asarray(b))
    cap = math.ceil(3.0 * instance.k * math.log(max(n, 2)) / eps)
    src = as_source(rng)
    t = np.asarray(demand.t, dtype=float)
    for attempt in range(max_attempts):
        mask = dep_round(p, src.stream("log_blowup", attempt))
        s = set(np.flatnonzero(mask).tolist())
        if not s:
            continue
        assert len(s) <= cap, "cardinality exceeded its ceiling"
        d = instance.service_distances(s)
        if (d <= (1 + eps) * t + 1e-12).all():
            return Determinization.build(instance, demand, s)
    raise InfeasibleDemand(
        f"distance check failed {max_attempts} times; the demand vector is "
        "almost certainly infeasible")


def determinize_exact_k(instance, demand):
    """Greedy budget-exact determinization, O(|F||C|) time.

    Repeatedly picks the unserved client of smallest target and opens its
    nearest facility.  On feasible demands the loop returns within k picks;
    k+1 picks constitute a proof of infeasibility, returned as a witness.
    """
    t = np.asarray(demand.t, dtype=float)
    k = instance.k
    factor = k + 2
    nearest = np.array([instance.nearest(j)[0]
                        for j in range(instance.n_clients)])
    d_cur = np.full(instance.n_clients, math.inf)
    opened = []
    picks = []
    for _ in range(instance.n_facilities + 1):
        unserved = np.flatnonzero(d_cur > factor * t + 1e-12)
        if unserved.size == 0:
            return Determinization.build(instance, demand, set(opened))
        jl = int(unserved[np.lexsort((unserved, t[unserved]))[0]])
        picks.append(jl)
        if len(picks) > k:
            return InfeasibilityWitness(picks, t[picks].tolist())
        v = int(nearest[jl])
        opened.append(v)
        d_cur = np.minimum(d_cur, instance.D[v, :])
    return Determinization.build(instance, demand, set(opened))
