"""Lottery roundings for deterministic coverage demands (p = 1 everywhere).

All three samplers share the same skeleton: build unit-mass clusters from a
fractional opening, select a conflict-free family of clusters greedily, open
exactly one facility per selected cluster, and dependently round the rest.
They differ in how the one facility per cluster is drawn:

* general: proportional to the fractional opening;
* scc: proportional with probability mass q shifted onto the cluster center
  (legal only when centers are facilities, i.e. clients = facilities);
* partial: greedy residual decomposition into full/partial clusters with a
  random shift pair (Q_full, Q_partial) drawn once per sample.

Every sampler keeps d(j, S) <= 3 r_j with probability one and |S| <= k.
"""

import math
from dataclasses import dataclass

import numpy as np

from .core import DemandChance
from .errors import InputError
from .lp import solve_chance_lp
from .chance import chance_clusters, chance_opening
from .rng import as_source
from .rounding import greedy_cluster
from . import _kernels

# expected-distance factors certified for each sampler
GENERAL_MEAN_FACTOR = 1.0 + 2.0 / math.e       # ~1.73576
SCC_Q = 0.464587
SCC_MEAN_FACTOR = 1.60793
PARTIAL_MEAN_FACTOR = 1.592


def certified_shift_factor(q):
    """Expectation constant certified for a given center-shift value."""
    if q == 0.0:
        return GENERAL_MEAN_FACTOR
    if q == SCC_Q:
        return SCC_MEAN_FACTOR
    from .certify import certify_scc_bound
    return certify_scc_bound(q=q, s_grid=2.0**-16)


@dataclass
class QDistribution:
    """Finite distribution over shift pairs (q_full, q_partial)."""

    atoms: list          # [(q_f, q_p), ...]
    probs: list

    def __post_init__(self):
        if len(self.atoms) != len(self.probs) or not self.atoms:
            raise InputError("QDistribution needs one probability per atom")
        p = np.asarray(self.probs, dtype=float)
        if (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
            raise InputError("atom probabilities must be >= 0 and sum to 1")
        for qf, qp in self.atoms:
            if not (0 <= qf <= 1 and 0 <= qp <= 1):
                raise InputError("shift values must lie in [0, 1]")

    @classmethod
    def certified_default(cls):
        return cls([(0.4525, 0.0), (0.0480, 0.3950)], [0.773436, 1 - 0.773436])

    @classmethod
    def point(cls, qf, qp):
        return cls([(float(qf), float(qp))], [1.0])

    def to_json_dict(self):
        return {"atoms": [{"q_f": a[0], "q_p": a[1], "prob": p}
                          for a, p in zip(self.atoms, self.probs)]}

    @classmethod
    def from_json_dict(cls, obj):
        rows = obj["atoms"]
        return cls([(r["q_f"], r["q_p"]) for r in rows],
                   [r["prob"] for r in rows])


def _nudge_sum_to_integer(y, target):
    """Adjust the largest entry so the running float sum hits ``target``.

    LP residuals can leave the vector sum ~1e-8 away from its integer value;
    dependent rounding needs the drift below its 1e-12 snap or the hard
    cardinality bound could break with tiny probability.
    """
    y = y.copy()
    for _ in range(6):
        s = 0.0
        for v in y:
            s += v
        gap = target - s
        if abs(gap) < 1e-13:
            return y
        # only entries strictly inside (0,1) absorb the correction: integral
        # entries (always/never open) must stay exact
        interior = np.nonzero((y > 1e-9) & (y < 1.0 - 1e-9))[0]
        if interior.size == 0:
            return y
        i = int(interior[np.argmax(y[interior])])
        y[i] = min(1.0, max(0.0, y[i] + gap))
    return y


def _radius_vector(instance, r):
    r = np.asarray(r, dtype=float)
    if r.ndim == 0:
        r = np.full(instance.n_clients, float(r))
    if r.size != instance.n_clients:
        raise InputError("one radius per client required")
    return r


class ClusterLotterySampler:
    """Common machinery for the general and scc samplers."""

    label = "lottery"

    def __init__(self, instance, r, q=0.0, b=None):
        if q and not instance.scc:
            raise InputError("center shift requires an SCC instance")
        self.instance = instance
        self.r = _radius_vector(instance, r)
        self.q = float(q)
        demand = DemandChance(np.ones(instance.n_clients), self.r)
        if b is None:
            b = chance_opening(instance, demand)
        self.b = b
        self.family = chance_clusters(instance, demand, b)
        self.winners = greedy_cluster(self.family.clusters, self.r)
        used = np.zeros(self.family.n_copies, dtype=bool)
        for j in self.winners:
            used[self.family.clusters[j]] = True
        resid = np.where(used, 0.0, self.family.mass)
        self.resid = _nudge_sum_to_integer(
            np.clip(resid, 0.0, 1.0), instance.k - len(self.winners))
        # per-winner pick tables: slot 0 opens the cluster center outright
        self.tables = []
        for j in self.winners:
            cl = self.family.clusters[j]
            w = np.concatenate([[self.q], (1.0 - self.q) * self.family.mass[cl]])
            self.tables.append((np.cumsum(w), cl))

    @property
    def mean_factor(self):
        """Certified expectation constant for this sampler's shift value."""
        return certified_shift_factor(self.q)

    hard_factor = 3.0

    def sample_batch_copies(self, n_samples, rng):
        """(copy mask, winner picks) per sample; tests use the copy view."""
        src = as_source(rng)
        nw = len(self.winners)
        u_w = src.stream(self.label + "_pick").random((n_samples, max(nw, 1)))
        gen = src.stream(self.label + "_dep")
        uniforms = gen.random((n_samples, max(self.resid.size, 1)))
        copies = np.zeros((n_samples, self.family.n_copies), dtype=np.uint8)
        _kernels.depround_batch(self.resid, uniforms, copies)
        picks = np.full((n_samples, nw), -1, dtype=int)  # -1 opens the center
        for a, (cum, cl) in enumerate(self.tables):
            slot = np.searchsorted(cum, u_w[:, a] * cum[-1], side="right")
            slot = np.minimum(slot, len(cl))
            nz = slot > 0
            picks[nz, a] = cl[slot[nz] - 1]
        return copies.astype(bool), picks

    def sample_batch(self, n_samples, rng):
        """Boolean open-facility masks, (n_samples, |F|)."""
        copies, picks = self.sample_batch_copies(n_samples, rng)
        inst = self.instance
        mask = np.zeros((n_samples, inst.n_facilities), dtype=bool)
        rows, ci = np.nonzero(copies)
        mask[rows, self.family.origin[ci]] = True
        for a, j in enumerate(self.winners):
            col = picks[:, a]
            center = col < 0
            mask[center, j] = True  # slot 0: the center facility itself
            rows = np.nonzero(~center)[0]
            mask[rows, self.family.origin[col[rows]]] = True
        return mask

    def sample(self, rng):
        return set(np.flatnonzero(self.sample_batch(1, rng)[0]).tolist())


def lottery_general(instance, r, rng, b=None):
    return ClusterLotterySampler(instance, r, 0.0, b).sample(rng)


def lottery_scc(instance, r, rng, q=SCC_Q, b=None):
    if not instance.scc:
        raise InputError("lottery_scc requires an SCC instance")
    return ClusterLotterySampler(instance, r, q, b).sample(rng)


# ------------------------------------------------------- partial clusters


@dataclass
class PartialClusterDecomposition:
    """Greedy residual decomposition of unit clusters.

    order[i] is the client whose residual cluster was largest at step i;
    groups[i] the residual copy set; z[i] its mass, nonincreasing with
    z[0] = 1.
    """

    order: list
    groups: list
    z: np.ndarray

    def full(self, i):
        return self.z[i] >= 1.0 - 1e-9


def build_partial_decomposition(instance, family):
    nc = instance.n_clients
    remaining = list(range(nc))
    taken = set()
    order, groups, zs = [], [], []
    masses = family.mass
    while remaining:
        best, best_mass, best_set = -1, -1.0, None
        for j in remaining:
            resid = [ci for ci in family.clusters[j] if ci not in taken]
            m = 0.0
            for ci in resid:
                m += masses[ci]
            if m > best_mass + 1e-15:
                best, best_mass, best_set = j, m, resid
        order.append(best)
        groups.append(np.array(best_set, dtype=int))
        zs.append(best_mass)
        taken.update(best_set)
        remaining.remove(best)
    z = np.array(zs)
    z[np.abs(z - 1.0) <= 1e-9] = 1.0
    z[z <= 1e-12] = 0.0
    if z.size and z[0] != 1.0:
        raise AssertionError(f"leading residual mass {z[0]!r} is not 1")
    if (np.diff(z) > 1e-9).any():
        raise AssertionError("residual masses are not nonincreasing")
    if z.sum() > instance.k + 1e-6:
        raise AssertionError("residual masses exceed the budget")
    return PartialClusterDecomposition(order, groups, z)


class PartialLotterySampler:
    """Homogeneous SCC sampler with full/partial shift pairs."""

    label = "partial"
    hard_factor = 3.0
    mean_factor = PARTIAL_MEAN_FACTOR

    def __init__(self, instance, qdist=None, r=None, b=None):
        if not instance.scc:
            raise InputError("partial-cluster lottery requires an SCC instance")
        self.instance = instance
        self.qdist = qdist or QDistribution.certified_default()
        if r is None:
            r = guess_radius(instance)
        self.r_common = float(np.asarray(r).reshape(-1)[0])
        rv = _radius_vector(instance, r)
        if not (rv == self.r_common).all():
            raise InputError("partial-cluster lottery requires a common radius")
        self.r = rv
        demand = DemandChance(np.ones(instance.n_clients), self.r)
        if b is None:
            b = chance_opening(instance, demand)
        self.b = b
        self.family = chance_clusters(instance, demand, b)
        self.decomp = build_partial_decomposition(instance, self.family)
        self.z = _nudge_sum_to_integer(self.decomp.z.copy(),
                                       round(self.decomp.z.sum())) \
            if abs(self.decomp.z.sum() - round(self.decomp.z.sum())) < 1e-6 \
            else self.decomp.z
        # pick tables per (atom, rank): slot 0 opens the center facility
        self.tables = []
        for ai, (qf, qp) in enumerate(self.qdist.atoms):
            per_rank = []
            for i, j in enumerate(self.decomp.order):
                zi = self.decomp.z[i]
                if zi <= 0.0:
                    per_rank.append(None)
                    continue
                qj = qf if self.decomp.full(i) else qp
                cl = self.decomp.groups[i]
                w = np.concatenate([[qj * zi],
                                    (1.0 - qj) * self.family.mass[cl]])
                per_rank.append((np.cumsum(w), cl, j))
            self.tables.append(per_rank)

    def sample_batch(self, n_samples, rng):
        src = as_source(rng)
        inst = self.instance
        nr = len(self.decomp.order)
        atom_cum = np.cumsum(self.qdist.probs)
        u_atom = src.stream("partial_atom").random(n_samples)
        atom = np.searchsorted(atom_cum, u_atom * atom_cum[-1], side="right")
        atom = np.minimum(atom, len(self.qdist.atoms) - 1)
        gen = src.stream("partial_dep")
        uniforms = gen.random((n_samples, max(nr, 1)))
        sel = np.zeros((n_samples, nr), dtype=np.uint8)
        _kernels.depround_batch(np.clip(self.z, 0.0, 1.0), uniforms, sel)
        u_w = src.stream("partial_pick").random((n_samples, nr))
        mask = np.zeros((n_samples, inst.n_facilities), dtype=bool)
        for ai in range(len(self.qdist.atoms)):
            in_atom = atom == ai
            for i in range(nr):
                tab = self.tables[ai][i]
                if tab is None:
                    continue
                cum, cl, center = tab
                rows = np.nonzero(in_atom & (sel[:, i] > 0))[0]
                if rows.size == 0:
                    continue
                slot = np.searchsorted(cum, u_w[rows, i] * cum[-1],
                                       side="right")
                is_center = slot == 0
                mask[rows[is_center], center] = True
                hit = rows[~is_center]
                ci = cl[np.minimum(slot[~is_center], len(cl)) - 1]
                mask[hit, self.family.origin[ci]] = True
        return mask

    def sample(self, rng):
        return set(np.flatnonzero(self.sample_batch(1, rng)[0]).tolist())


def lottery_partial(instance, rng, qdist=None, r=None, b=None):
    return PartialLotterySampler(instance, qdist, r, b).sample(rng)


# ------------------------------------------------------------ radius guess


def guess_radius(instance):
    """Smallest candidate radius T with the unit-coverage LP feasible.

    Candidates are the distinct facility-client distances; feasibility is
    monotone in T, so a binary search applies.
    """
    cands = np.unique(instance.D)
    ones = np.ones(instance.n_clients)

    def feasible(t):
        demand = DemandChance(ones, np.full(instance.n_clients, t))
        return solve_chance_lp(instance, demand).feasible

    lo, hi = 0, cands.size - 1
    if not feasible(cands[hi]):
        raise InputError("instance admits no finite covering radius")
    while lo < hi:
        mid = (lo + hi) // 2
        if feasible(cands[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(cands[lo])
