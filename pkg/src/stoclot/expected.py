"""Expected-distance lotteries via multiplicative weights.

Given feasible targets t_j (some distribution achieves E[d(j,S)] <= t_j) and
any alpha-approximate weighted k-median solver, repeated reweighted solver
calls produce an explicitly enumerated lottery with per-client expectation
at most (alpha + O(eps)) t_j.  The support is then reduced below |C| + 2 by
nullspace pivoting that preserves every client expectation exactly.
"""

import math
import warnings
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import InfeasibleDemand, InputError, ResourceError
from .lp import solve_expectation_lp
from .rng import as_source

__all__ = [
    "ExplicitLottery", "KMedianPlugin", "kmedian_bruteforce",
    "kmedian_localsearch", "bounded_ratio_kmedian", "mwu_lottery",
    "reduce_support", "sparsify_sampling",
]


@dataclass
class ExplicitLottery:
    """A finite distribution over facility sets."""

    atoms: list  # [(frozenset of facility indices, probability), ...]

    def __post_init__(self):
        probs = np.array([p for _, p in self.atoms], dtype=float)
        if (probs < -1e-12).any() or abs(probs.sum() - 1.0) > 1e-9:
            raise InputError("atom probabilities must be >= 0 and sum to 1")

    @property
    def support_size(self):
        return len(self.atoms)

    def expectations(self, instance):
        """E[d(j, S)] per client, computed exactly over the support."""
        out = np.zeros(instance.n_clients)
        for s, p in self.atoms:
            out += p * instance.service_distances(s)
        return out

    def max_cardinality(self):
        return max(len(s) for s, _ in self.atoms)

    def merged(self):
        acc = {}
        for s, p in self.atoms:
            acc[s] = acc.get(s, 0.0) + p
        atoms = sorted(acc.items(), key=lambda kv: sorted(kv[0]))
        return ExplicitLottery([(s, p) for s, p in atoms])

    def sample(self, rng):
        gen = as_source(rng).stream("lottery_atom")
        cum = np.cumsum([p for _, p in self.atoms])
        i = int(np.searchsorted(cum, gen.random() * cum[-1], side="right"))
        return set(self.atoms[min(i, len(self.atoms) - 1)][0])

    def to_json_dict(self, instance=None):
        ids = (lambda s: sorted(instance.facility_ids[i] for i in s)) \
            if instance is not None else (lambda s: sorted(s))
        return {"atoms": [{"set": ids(s), "prob": float(p)}
                          for s, p in self.atoms]}

    @classmethod
    def from_json_dict(cls, obj, instance=None):
        conv = (lambda xs: frozenset(instance.facility_index(x) for x in xs)) \
            if instance is not None else (lambda xs: frozenset(xs))
        return cls([(conv(row["set"]), float(row["prob"]))
                    for row in obj["atoms"]])


# ----------------------------------------------------------------- plugins


@dataclass
class KMedianPlugin:
    """A weighted k-median solver plus its declared approximation factor."""

    name: str
    solve: callable  # (instance, weights, k, gen) -> set of facility indices
    alpha: float


def _kmedian_cost(instance, weights, s):
    return float(weights @ instance.service_distances(s))


def kmedian_bruteforce(instance, weights, k, gen=None):
    """Exact weighted k-median by enumeration; ties by lexicographic set."""
    nf = instance.n_facilities
    if math.comb(nf, k) > 10**6:
        raise InputError("brute-force k-median cap exceeded")
    weights = np.asarray(weights, dtype=float)
    best, best_cost = None, math.inf
    for s in combinations(range(nf), k):
        cost = float(weights @ instance.D[list(s), :].min(axis=0))
        if cost < best_cost - 1e-15:
            best, best_cost = s, cost
    return set(best)


def kmedian_localsearch(instance, weights, k, gen=None):
    """Single-swap local search; deterministic given the generator state."""
    nf = instance.n_facilities
    if k > nf:
        raise InputError("k exceeds facility count")
    weights = np.asarray(weights, dtype=float)
    if gen is None:
        gen = as_source(0).stream("kmedian_ls")
    current = set(gen.choice(nf, size=k, replace=False).tolist())
    cost = _kmedian_cost(instance, weights, current)
    improved = True
    while improved:
        improved = False
        best_swap, best_cost = None, cost
        for out in sorted(current):
            for inn in range(nf):
                if inn in current:
                    continue
                cand = (current - {out}) | {inn}
                c = _kmedian_cost(instance, weights, cand)
                if c < best_cost - 1e-12:
                    best_swap, best_cost = (out, inn), c
        if best_swap is not None:
            out, inn = best_swap
            current = (current - {out}) | {inn}
            assert best_cost <= cost + 1e-12  # never worsens
            cost = best_cost
            improved = True
    return current


PLUGINS = {
    "bruteforce": KMedianPlugin("bruteforce", kmedian_bruteforce, 1.0),
    "localsearch": KMedianPlugin("localsearch", kmedian_localsearch, 5.0),
}


# ------------------------------------------------------------ bounded ratio


def _guard_targets(instance, t):
    t = np.asarray(t, dtype=float)
    theta = instance.thetas()
    bad = (t <= 0) & (theta > 0)
    if bad.any():
        raise InfeasibleDemand(
            f"client {int(np.flatnonzero(bad)[0])} demands zero expected "
            "distance but has no facility at distance zero")
    # zero targets with theta=0 act as (near-)mandatory opens; an enormous
    # finite weight keeps the arithmetic well-defined
    scale = t[t > 0].min() if (t > 0).any() else 1.0
    return np.where(t > 0, t, scale * 1e-12)


def bounded_ratio_kmedian(instance, demand, eps, plugin, weights=None,
                          gen=None):
    """One reweighted solver call bounding every ratio d(j,S)/t_j.

    With w normalized to sum 1 and z_j = (eps/n + w_j)/t_j the returned set
    satisfies sum_j w_j d(j,S)/t_j <= alpha(1+eps) and, per client,
    d(j,S) <= alpha(1+eps) n t_j / eps, where n counts clients and
    facilities together.
    """
    if not 0 < eps <= 1:
        raise InputError("eps must lie in (0, 1]")
    t = _guard_targets(instance, demand.t)
    n = instance.n_points
    if weights is None:
        weights = np.ones(instance.n_clients)
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    z = (eps / n + w) / t
    s = plugin.solve(instance, z, instance.k, gen)
    if len(s) > instance.k:
        raise AssertionError("plugin returned more than k facilities")
    return set(s)


# -------------------------------------------------------------------- mwu


def default_rounds(instance, eps):
    n = instance.n_points
    return math.ceil(n * math.log(max(n, 2)) / eps**3)


def mwu_lottery(instance, demand, eps, plugin, rounds=None, check_lp=True,
                seed=0):
    """Multiplicative-weights lottery for expected-distance targets.

    Weights evolve as w_j = exp(eps^2 * sum_s d(j, X_s) / (n t_j)); each
    round solves a bounded-ratio weighted k-median.  The uniform
    distribution over the round solutions is returned (duplicates merged).
    ``rounds`` caps/overrides the default ceil(n ln n / eps^3).
    """
    if not 0 < eps <= 1:
        raise InputError("eps must lie in (0, 1]")
    if check_lp:
        res, _ = solve_expectation_lp(instance, demand)
        if not res.feasible:
            raise InfeasibleDemand("expectation polytope is empty",
                                   certificate=res.infeasibility)
    t = _guard_targets(instance, demand.t)
    n = instance.n_points
    r = default_rounds(instance, eps)
    if rounds is not None and rounds < r:
        warnings.warn(
            f"round budget {rounds} is below the {r} needed for the eps "
            "guarantee; the achieved ratio is only as good as reported",
            stacklevel=2)
        r = int(rounds)
    r = max(r, 1)
    phi = eps**2 / n
    gen = as_source(seed).stream("mwu_plugin")
    alpha = plugin.alpha
    # provable per-round bounds, used for the potential check below
    agg = alpha * (1 + eps)
    umax = eps * agg
    growth = (math.expm1(umax) / umax) if umax > 0 else 1.0
    log_w = np.zeros(instance.n_clients)
    picks = []
    for _ in range(r):
        w = np.exp(log_w - log_w.max())  # scale-free in the solver
        s = bounded_ratio_kmedian(instance, demand, eps, plugin, w, gen)
        picks.append(frozenset(s))
        # zero-target clients carry a placeholder t; cap their log-weight
        # pressure instead of overflowing exp()
        u = np.minimum(phi * instance.service_distances(s) / t, 100.0)
        phi_before = w.sum()
        phi_after = float((w * np.exp(u)).sum())
        assert phi_after <= phi_before * math.exp(phi * growth * agg) * 1.01, \
            "potential grew faster than the per-round guarantee allows"
        log_w = log_w + u - log_w.max()
    p = 1.0 / len(picks)
    return ExplicitLottery([(s, p) for s in picks]).merged()


# --------------------------------------------------------- support surgery


def reduce_support(instance, lottery, targets=None, max_support=None):
    """Shrink the support to <= |C|+1 atoms preserving every expectation.

    The lottery is a point of the polytope {q >= 0, sum q = 1,
    sum_X q_X d(j, X) = current value}; repeatedly moving along a nullspace
    direction of the equality rows to the nearest coordinate boundary drops
    one atom per step without changing any constraint value.  When target
    ceilings are supplied the input must already satisfy them (the output
    then trivially does, since the expectations are preserved exactly).
    """
    lott = lottery.merged()
    if targets is not None:
        bad = lott.expectations(instance) > np.asarray(targets) + 1e-9
        if bad.any():
            raise InputError(
                f"client {int(np.flatnonzero(bad)[0])} already exceeds its "
                "expectation ceiling")
    nc = instance.n_clients
    target = nc + 1 if max_support is None else int(max_support)
    atoms = list(lott.atoms)
    if len(atoms) <= target:
        return lott
    dist = np.array([instance.service_distances(s) for s, _ in atoms]).T
    q = np.array([p for _, p in atoms], dtype=float)
    # rows: one per client expectation, plus the total-probability row
    M = np.vstack([dist, np.ones(len(atoms))])
    live = list(range(len(atoms)))
    while len(live) > target:
        v = _nullspace_vector(M[:, live])
        if v is None:
            break  # equality rows have full column rank; cannot shrink more
        if (v > 0).sum() == 0:
            v = -v
        ratios = [(q[live[a]] / v[a], a) for a in range(len(live)) if v[a] > 1e-14]
        step, drop = min(ratios, key=lambda x: (x[0], x[1]))
        for a, idx in enumerate(live):
            q[idx] -= step * v[a]
        q[live[drop]] = 0.0
        live = [idx for idx in live if q[idx] > 1e-15]
    total = q[live].sum()
    return ExplicitLottery([(atoms[idx][0], float(q[idx] / total))
                            for idx in live])


def _nullspace_vector(M):
    """A deterministic nonzero nullspace vector via Gaussian elimination."""
    m, n = M.shape
    A = M.astype(float).copy()
    pivots = []
    row = 0
    for col in range(n):
        if row >= m:
            break
        piv = row + int(np.argmax(np.abs(A[row:, col])))
        if abs(A[piv, col]) < 1e-12:
            continue
        A[[row, piv]] = A[[piv, row]]
        A[row] /= A[row, col]
        for i in range(m):
            if i != row and A[i, col] != 0.0:
                A[i] -= A[i, col] * A[row]
        pivots.append(col)
        row += 1
    free = [c for c in range(n) if c not in pivots]
    if not free:
        return None
    f = free[0]
    v = np.zeros(n)
    v[f] = 1.0
    for rr, col in enumerate(pivots):
        v[col] = -A[rr, f]
    return v


# ------------------------------------------------------------- sparsifier


def sparsify_sampling(instance, sampler, eps, rng, max_attempts=64):
    """Uniform lottery over fresh draws with Chernoff-checked means.

    Draws ceil(6 ln n / (c eps^2)) samples (c the sampler's certified mean
    factor), forms the uniform lottery, and retries with a fresh child seed
    until every per-client empirical mean is within (1+eps) of the certified
    bound.  Atoms inherit the sampler's hard radius bound.
    """
    if eps <= 0:
        raise InputError("eps must be positive")
    n = instance.n_points
    c = sampler.mean_factor
    t_draws = max(1, math.ceil(6.0 * math.log(max(n, 2)) / (c * eps**2)))
    src = as_source(rng)
    bound = (1 + eps) * c * np.asarray(sampler.r, dtype=float)
    for attempt in range(max_attempts):
        masks = sampler.sample_batch(t_draws, src.child("sparsify", attempt))
        dists = np.where(masks[:, :, None], instance.D[None, :, :],
                         np.inf).min(axis=1)
        means = dists.mean(axis=0)
        if (means <= bound + 1e-12).all():
            p = 1.0 / t_draws
            atoms = [(frozenset(np.flatnonzero(m).tolist()), p)
                     for m in masks]
            return ExplicitLottery(atoms).merged()
    raise ResourceError("sparsification kept failing its Chernoff check")
