"""Chance coverage rounding: serve client j within r_j with probability p_j.

Three algorithms over a fractional opening of the coverage polytope:

* ``round_probability_faithful`` - dependent rounding of the opening vector;
  keeps every radius exactly and at least a (1 - 1/e) fraction of each
  probability demand.
* ``round_half_homogeneous`` - greedy cluster selection plus dependent
  rounding of the survivor probabilities; keeps probabilities exactly at
  3x radius (2x in the SCC setting) when the instance has equal p or equal r.
* ``round_iterative_general`` - iterative rounding via an unbiased walk in
  the nullspace of the tight cluster constraints; keeps probabilities
  exactly at 9x radius for arbitrary demands.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import InfeasibleDemand, InputError
from .lp import ClusterFamily, solve_chance_lp, split_facilities
from .rng import as_source
from .rounding import dep_round_restricted, greedy_cluster

SUM_TOL = _kernels.SUM_TOL


def chance_opening(instance, demand):
    """Solve the coverage LP, raising InfeasibleDemand when empty."""
    res = solve_chance_lp(instance, demand)
    if not res.feasible:
        raise InfeasibleDemand(
            "no fractional opening satisfies the coverage demands",
            certificate=res.infeasibility)
    return res.x


def chance_clusters(instance, demand, b):
    """Per-client clusters F_j inside B(j, r_j) with mass exactly p_j."""
    targets = [(float(demand.r[j]), float(demand.p[j]))
               for j in range(instance.n_clients)]
    return split_facilities(instance, b, targets, mode="shared",
                            ensure_center=instance.scc)


# ------------------------------------------------------------- faithful mode


class FaithfulSampler:
    """DepRound of the opening vector; radii exact, probabilities x(1-1/e)."""

    label = "chance_faithful"

    def __init__(self, instance, demand, b=None):
        self.instance = instance
        self.demand = demand
        if b is None:
            b = chance_opening(instance, demand)
        from .lottery import _nudge_sum_to_integer
        self.b = _nudge_sum_to_integer(np.clip(b, 0.0, 1.0), instance.k)

    def sample_batch(self, n_samples, rng):
        gen = as_source(rng).stream(self.label)
        uniforms = gen.random((n_samples, max(self.b.size, 1)))
        out = np.zeros((n_samples, self.b.size), dtype=np.uint8)
        _kernels.depround_batch(self.b, uniforms, out)
        return out.astype(bool)

    def sample(self, rng):
        return set(np.flatnonzero(self.sample_batch(1, rng)[0]).tolist())


def round_probability_faithful(instance, demand, rng, b=None):
    """One draw of DepRound over the fractional opening itself."""
    return FaithfulSampler(instance, demand, b).sample(rng)


# ------------------------------------------------------- half-homogeneous


class HalfHomogSampler:
    """Greedy clusters + DepRound of surviving probabilities.

    Only defined for equal-p ("equal_p") or equal-r ("equal_r") demand
    vectors; each survivor opens the facility nearest its center.
    """

    label = "chance_half_homog"

    def __init__(self, instance, demand, mode, b=None):
        if mode == "equal_p":
            if not demand.homogeneous_p():
                raise InputError("equal_p mode requires identical probabilities")
            weights = demand.r
        elif mode == "equal_r":
            if not demand.homogeneous_r():
                raise InputError("equal_r mode requires identical radii")
            weights = 1.0 - demand.p
        else:
            raise InputError(f"unknown mode {mode!r}")
        self.instance = instance
        self.demand = demand
        self.mode = mode
        if b is None:
            b = chance_opening(instance, demand)
        self.b = b
        family = chance_clusters(instance, demand, b)
        nonempty = [j for j in range(instance.n_clients)
                    if len(family.clusters[j]) > 0]
        winners = greedy_cluster([family.clusters[j] for j in nonempty],
                                 [weights[j] for j in nonempty])
        self.winners = [nonempty[j] for j in winners]
        self.family = family
        self.y = np.zeros(instance.n_clients)
        self.y[self.winners] = demand.p[self.winners]
        if self.y.sum() > instance.k:
            from .lottery import _nudge_sum_to_integer
            self.y = _nudge_sum_to_integer(self.y, instance.k)
        self.centers = np.array([instance.nearest(j)[0]
                                 for j in range(instance.n_clients)])

    def sample_batch(self, n_samples, rng):
        gen = as_source(rng).stream(self.label)
        uniforms = gen.random((n_samples, max(self.y.size, 1)))
        out = np.zeros((n_samples, self.y.size), dtype=np.uint8)
        _kernels.depround_batch(self.y, uniforms, out)
        mask = np.zeros((n_samples, self.instance.n_facilities), dtype=bool)
        rows, js = np.nonzero(out)
        mask[rows, self.centers[js]] = True
        return mask

    def sample(self, rng):
        return set(np.flatnonzero(self.sample_batch(1, rng)[0]).tolist())


def round_half_homogeneous(instance, demand, mode, rng, b=None):
    """One draw of the greedy-cluster rounding (see HalfHomogSampler)."""
    return HalfHomogSampler(instance, demand, mode, b).sample(rng)


# ------------------------------------------------------- iterative rounding


@dataclass
class IterativeState:
    """Walk state: copy masses plus the tight/slack cluster partition."""

    instance: object
    family: ClusterFamily
    b: np.ndarray
    tight: tuple
    slack: tuple
    history: list = field(default_factory=list)

    def cluster_mass(self, j):
        s = 0.0
        for ci in self.family.clusters[j]:
            s += self.b[ci]
        return s

    def active_mass(self):
        active = set()
        for j in self.tight + self.slack:
            active.update(self.family.clusters[j].tolist())
        s = 0.0
        for i in sorted(active):
            s += self.b[i]
        return s

    def check_invariants(self):
        """Tight clusters unit-mass and pairwise disjoint; slack <= 1;
        active mass <= k."""
        inter = self.family.intersection_matrix()
        assert not set(self.tight) & set(self.slack)
        for a, z in enumerate(self.tight):
            assert abs(self.cluster_mass(z) - 1.0) <= 1e-6, \
                f"tight cluster {z} has mass {self.cluster_mass(z)}"
            for z2 in self.tight[a + 1:]:
                assert not inter[z, z2], f"tight clusters {z},{z2} intersect"
        for z in self.slack:
            assert self.cluster_mass(z) <= 1.0 + 1e-6
        assert self.active_mass() <= self.instance.k + 1e-6


def initial_state(instance, demand, b=None):
    if b is None:
        b = chance_opening(instance, demand)
    family = chance_clusters(instance, demand, b)
    masses = family.mass.copy()
    return IterativeState(instance, family, masses, tight=(),
                          slack=tuple(range(instance.n_clients)))


def _walk_arrays(family):
    nc = len(family.clusters)
    cl_ptr = np.zeros(nc + 1, dtype=np.int32)
    for j in range(nc):
        cl_ptr[j + 1] = cl_ptr[j] + len(family.clusters[j])
    cl_idx = np.concatenate([family.clusters[j] for j in range(nc)]) \
        if cl_ptr[-1] else np.zeros(0, dtype=int)
    member = family.member_matrix()
    nm = family.n_copies
    co_lists = [[] for _ in range(nm)]
    for j in range(nc):
        for ci in family.clusters[j]:
            co_lists[ci].append(j)
    co_ptr = np.zeros(nm + 1, dtype=np.int32)
    for i in range(nm):
        co_ptr[i + 1] = co_ptr[i] + len(co_lists[i])
    co_idx = np.concatenate([np.array(c, dtype=np.int32) for c in co_lists]) \
        if co_ptr[-1] else np.zeros(0, dtype=np.int32)
    return (cl_ptr, np.asarray(cl_idx, dtype=np.int32), co_ptr,
            np.asarray(co_idx, dtype=np.int32), member,
            family.intersection_matrix())


def uniform_budget(family, n_clients):
    # one draw per walk step; steps are bounded by coordinates that can go
    # integral plus two stop events per outer iteration
    return family.n_copies + 2 * n_clients + 8


def basic_walk_step(state, rng):
    """Unbiased nullspace walk until some slack cluster's mass is 0 or 1.

    E[b'] = b holds exactly: every step moves +dp with probability
    dm/(dp+dm) and -dm otherwise, where dp/dm are the distances to the first
    newly-tight constraint in either direction.
    """
    return _walk_step(state, rng=rng)[0]


def _walk_step(state, rng=None, uniforms=None, cursor=0):
    """basic_walk_step threading an explicit uniform buffer; returns
    (new_state, cursor) so a full run consumes one contiguous stream."""
    if not state.slack:
        raise InputError("walk requires a nonempty slack set")
    fam = state.family
    nc = len(fam.clusters)
    if uniforms is None:
        gen = as_source(rng).stream("walk_step")
        uniforms = gen.random(uniform_budget(fam, nc))
    b = state.b.astype(float).copy()
    for i in range(b.size):
        b[i] = _snap(b[i])
    in_slack = np.zeros(nc, dtype=bool)
    in_tight = np.zeros(nc, dtype=bool)
    in_slack[list(state.slack)] = True
    in_tight[list(state.tight)] = True
    cl_ptr, cl_idx, co_ptr, co_idx, member, inter = _walk_arrays(fam)

    sums = np.zeros(nc)
    acount = np.zeros(fam.n_copies, dtype=int)
    tcount = np.zeros(fam.n_copies, dtype=int)
    for j in range(nc):
        s = 0.0
        for t in range(cl_ptr[j], cl_ptr[j + 1]):
            s += b[cl_idx[t]]
        sums[j] = s
        if in_slack[j] or in_tight[j]:
            for t in range(cl_ptr[j], cl_ptr[j + 1]):
                acount[cl_idx[t]] += 1
        if in_tight[j]:
            for t in range(cl_ptr[j], cl_ptr[j + 1]):
                tcount[cl_idx[t]] += 1
    total = 0.0
    for i in range(fam.n_copies):
        if acount[i] > 0:
            total += b[i]

    k = state.instance.k
    nm = fam.n_copies
    while True:
        hit = -1
        for j in range(nc):
            if in_slack[j] and (sums[j] <= SUM_TOL or sums[j] >= 1 - SUM_TOL):
                hit = j
                break
        if hit >= 0:
            break
        i1 = i2 = single = -1
        for j in range(nc):
            if not in_tight[j]:
                continue
            fr = [cl_idx[t] for t in range(cl_ptr[j], cl_ptr[j + 1])
                  if 0.0 < b[cl_idx[t]] < 1.0]
            if len(fr) >= 2:
                i1, i2 = fr[0], fr[1]
                break
        if i1 < 0:
            total_tight = total >= k - _kernels.pure.TOTAL_TOL
            free = [i for i in range(nm)
                    if acount[i] > 0 and tcount[i] == 0 and 0.0 < b[i] < 1.0]
            if not total_tight and free:
                single = free[0]
            elif len(free) >= 2:
                i1, i2 = free[0], free[1]
            else:
                raise AssertionError(
                    "no walk direction although every slack cluster is "
                    "fractional; state is not consistent")
        if single >= 0:
            dp = min(1.0 - b[single], k - total)
            dm = b[single]
            for t in range(co_ptr[single], co_ptr[single + 1]):
                j = co_idx[t]
                if in_slack[j]:
                    dp = min(dp, 1.0 - sums[j])
                    dm = min(dm, sums[j])
        else:
            dp = min(1.0 - b[i1], b[i2])
            dm = min(b[i1], 1.0 - b[i2])
            for t in range(co_ptr[i1], co_ptr[i1 + 1]):
                j = co_idx[t]
                if in_slack[j] and not member[j, i2]:
                    dp = min(dp, 1.0 - sums[j])
                    dm = min(dm, sums[j])
            for t in range(co_ptr[i2], co_ptr[i2 + 1]):
                j = co_idx[t]
                if in_slack[j] and not member[j, i1]:
                    dp = min(dp, sums[j])
                    dm = min(dm, 1.0 - sums[j])
        if cursor >= len(uniforms):
            raise AssertionError("uniform budget exhausted during walk")
        u = uniforms[cursor]
        cursor += 1
        delta = dp if u * (dp + dm) < dm else -dm
        touched = []
        if single >= 0:
            b[single] = _snap(b[single] + delta)
            total += delta
            touched = [single]
        else:
            b[i1] = _snap(b[i1] + delta)
            b[i2] = _snap(b[i2] - delta)
            touched = [i1, i2]
        for i in touched:
            for t in range(co_ptr[i], co_ptr[i + 1]):
                j = co_idx[t]
                s = 0.0
                for tt in range(cl_ptr[j], cl_ptr[j + 1]):
                    s += b[cl_idx[tt]]
                sums[j] = s

    new = replace(state, b=b, history=list(state.history))
    return new, cursor


def _snap(v):
    if v <= _kernels.SNAP:
        return 0.0
    if v >= 1.0 - _kernels.SNAP:
        return 1.0
    return v


def _resolve(state, demand):
    """Pop the least-index integral slack cluster and update memberships."""
    v = -1
    for j in state.slack:
        m = state.cluster_mass(j)
        if m <= SUM_TOL or m >= 1 - SUM_TOL:
            v = j
            break
    assert v >= 0, "walk returned without an integral slack cluster"
    hit_one = state.cluster_mass(v) >= 1 - SUM_TOL
    slack = [j for j in state.slack if j != v]
    tight = list(state.tight)
    if hit_one:
        tight.append(v)
        inter = state.family.intersection_matrix()
        half = demand.r[v] / 2.0
        removed = [z for z in tight + slack
                   if z != v and inter[z, v] and demand.r[z] >= half]
        tight = [z for z in tight if z not in removed]
        slack = [z for z in slack if z not in removed]
    state.history.append({"v": v, "hit": int(hit_one)})
    return replace(state, tight=tuple(sorted(tight)), slack=tuple(sorted(slack)),
                   history=state.history)


def open_from_state(state):
    """One facility per tight cluster: the copy of largest mass, least index."""
    fam = state.family
    opened = set()
    for j in state.tight:
        cl = fam.clusters[j]
        if len(cl) == 0:
            continue
        masses = state.b[cl]
        best = cl[int(np.argmax(masses))]
        opened.add(int(fam.origin[best]))
    return opened


def round_iterative_general(instance, demand, rng, b=None, trace=False,
                            check_invariants=True):
    """One draw of the iterative rounding; returns the open facility set.

    With trace=True returns (set, states) where states records every
    intermediate IterativeState (useful for martingale diagnostics).
    """
    state = initial_state(instance, demand, b)
    gen = as_source(rng).stream("iter_round")
    uniforms = gen.random((1, uniform_budget(state.family,
                                             instance.n_clients)))[0]
    cursor = 0
    states = [state]
    while state.slack:
        if check_invariants:
            state.check_invariants()
        state, cursor = _walk_step(state, uniforms=uniforms, cursor=cursor)
        state = _resolve(state, demand)
        if trace:
            states.append(state)
    if check_invariants:
        state.check_invariants()
    opened = open_from_state(state)
    if trace:
        return opened, states
    return opened


class IterativeSampler:
    """Batch sampler for the iterative rounding, kernel-accelerated.

    Draw n from ``sample_batch``; row i of the output equals what the
    single-draw path produces from the same uniforms row.
    """

    def __init__(self, instance, demand, b=None):
        self.instance = instance
        self.demand = demand
        if b is None:
            b = chance_opening(instance, demand)
        self.b = b
        self.state0 = initial_state(instance, demand, b)
        fam = self.state0.family
        (self.cl_ptr, self.cl_idx, self.co_ptr, self.co_idx,
         self.member, self.inter) = _walk_arrays(fam)
        self.family = fam
        self.width = uniform_budget(fam, instance.n_clients)

    def sample(self, rng):
        masks, _, _ = self.sample_batch_full(1, rng)
        return set(np.flatnonzero(masks[0]).tolist())

    def sample_batch(self, n_samples, rng):
        return self.sample_batch_full(n_samples, rng)[0]

    def sample_batch_full(self, n_samples, rng):
        """Returns (open_mask over facilities, ever_tight mask, status)."""
        gen = as_source(rng).stream("iter_round")
        fam = self.family
        nm = fam.n_copies
        nc = self.instance.n_clients
        uniforms = gen.random((n_samples, self.width))
        open_copies = np.zeros((n_samples, nm), dtype=np.uint8)
        ever_tight = np.zeros((n_samples, nc), dtype=np.uint8)
        status = np.zeros(n_samples, dtype=np.int8)
        _kernels.iter_round_batch(
            np.ascontiguousarray(fam.mass, dtype=float),
            self.cl_ptr, self.cl_idx, self.co_ptr, self.co_idx,
            np.ascontiguousarray(self.member), np.ascontiguousarray(self.inter),
            np.ascontiguousarray(self.demand.r, dtype=float),
            int(self.instance.k), uniforms, open_copies, ever_tight, status)
        if (status != _kernels.STATUS_OK).any():
            bad = int(np.flatnonzero(status != _kernels.STATUS_OK)[0])
            raise AssertionError(
                f"iterative rounding invariant failure (sample {bad}, "
                f"status {int(status[bad])})")
        open_fac = np.zeros((n_samples, self.instance.n_facilities),
                            dtype=bool)
        rows, copies = np.nonzero(open_copies)
        open_fac[rows, fam.origin[copies]] = True
        return open_fac, ever_tight.astype(bool), status
