"""Monte Carlo verification, exact small-instance oracles, and generators.

``mc_verify`` drives any batch sampler, enforces the hard per-sample
assertions (cardinality, worst-case radius) on every draw, and reports
empirical statistics with Hoeffding confidence radii at the 99% level.
Statistical pass/fail adds a fixed slack of 0.02 on top of the radius so a
full suite run stays reliable at N = 1e5.

``oracle_best_lottery`` solves the exact distribution LP over all k-subsets;
it is the ground truth that every approximate guarantee is checked against
on small instances.
"""

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .core import Instance
from .errors import InputError
from .lp import solve_lp
from .rng import as_source

CONFIDENCE_DELTA = 0.01   # 99% two-sided Hoeffding
STAT_SLACK = 0.02


def hoeffding_radius(n_samples, value_range=1.0, delta=CONFIDENCE_DELTA):
    return float(value_range) * math.sqrt(math.log(2.0 / delta)
                                          / (2.0 * n_samples))


# ----------------------------------------------------------------- checks


@dataclass
class HardCardinality:
    """|S| <= k on every sample."""
    k: int
    name = "cardinality"


@dataclass
class HardRadius:
    """d(j, S) <= factor * r_j on every sample."""
    factor: float
    r: np.ndarray
    name = "radius"


@dataclass
class CoverageAtLeast:
    """Pr[d(j,S) <= factor * r_j] >= target_j, with slack + radius."""
    factor: float
    r: np.ndarray
    target: np.ndarray
    name = "coverage"
    slack: float = STAT_SLACK


@dataclass
class MeanAtMost:
    """E[d(j,S)] <= factor * r_j + radius; range for the radius is
    hard_factor * r_j."""
    factor: float
    r: np.ndarray
    hard_factor: float = 3.0
    name = "mean"
    slack: float = 0.0


@dataclass
class VerificationReport:
    n_samples: int
    seed: int
    per_client: dict
    checks: list = field(default_factory=list)
    radii: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(ok for _, ok, _ in self.checks)

    def to_json_dict(self):
        return {
            "n_samples": self.n_samples,
            "seed": self.seed,
            "per_client": {k: np.asarray(v).tolist()
                           for k, v in self.per_client.items()},
            "radii": {k: (np.asarray(v).tolist() if np.ndim(v) else float(v))
                      for k, v in self.radii.items()},
            "checks": [{"name": n, "passed": bool(ok), "detail": d}
                       for n, ok, d in self.checks],
            "passed": self.passed,
        }


def mc_verify(sampler, n_samples, rng, checks=(), batch=4096, jobs=1):
    """Estimate per-client statistics of a sampler over n_samples draws.

    Hard checks abort with AssertionError on the first offending sample;
    statistical checks are recorded in the report.
    """
    if n_samples < 1000:
        raise InputError("mc_verify needs at least 1000 samples")
    inst = sampler.instance
    src = as_source(rng)
    nc = inst.n_clients
    D = inst.D

    chunks = []
    done = 0
    while done < n_samples:
        n = min(batch, n_samples - done)
        chunks.append((len(chunks), n))
        done += n

    def run_chunk(arg):
        idx, n = arg
        masks = sampler.sample_batch(n, src.child("mc", idx))
        sizes = masks.sum(axis=1)
        dists = np.where(masks[:, :, None], D[None, :, :], np.inf).min(axis=1)
        cover = {}
        for c in checks:
            if isinstance(c, CoverageAtLeast):
                cover[id(c)] = (dists <= c.factor * c.r[None, :]
                                + 1e-12).sum(axis=0)
        return (int(sizes.max(initial=0)),
                np.where(np.isfinite(dists), dists, 0.0).sum(axis=0),
                (~np.isfinite(dists)).sum(axis=0),
                dists.max(axis=0),
                {id(c): bool((dists > c.factor * c.r[None, :] + 1e-9).any())
                 for c in checks if isinstance(c, HardRadius)},
                cover)

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_chunk, chunks))
    else:
        results = [run_chunk(c) for c in chunks]

    cover_counts = {}
    for c in checks:
        if isinstance(c, CoverageAtLeast):
            cover_counts[id(c)] = np.zeros(nc)
    sum_d = np.zeros(nc)
    inf_d = np.zeros(nc)
    max_d = np.zeros(nc)
    for max_size, sd, inf_count, md, radius_bad, cover in results:
        for c in checks:
            if isinstance(c, HardCardinality):
                assert max_size <= c.k, \
                    f"sample opened {max_size} > k={c.k} facilities"
            elif isinstance(c, HardRadius):
                assert not radius_bad[id(c)], \
                    "worst-case radius bound violated on a sample"
        for key, cnt in cover.items():
            cover_counts[key] += cnt
        sum_d += sd
        inf_d += inf_count
        max_d = np.maximum(max_d, md)

    # an empty solution set has infinite service distance; keep the report
    # honest rather than averaging it away
    mean_d = np.where(inf_d > 0, np.inf, sum_d / n_samples)
    per_client = {"mean_d": mean_d, "max_d": max_d}
    report = VerificationReport(n_samples, src.seed, per_client)
    rad_ind = hoeffding_radius(n_samples)  # indicator observables
    report.radii["indicator"] = rad_ind
    for c in checks:
        if isinstance(c, HardCardinality):
            report.checks.append(("cardinality<=k", True, "held on all samples"))
        elif isinstance(c, HardRadius):
            report.checks.append((f"d<= {c.factor:g}r", True,
                                  "held on all samples"))
        elif isinstance(c, CoverageAtLeast):
            rate = cover_counts[id(c)] / n_samples
            per_client[f"cover_{c.factor:g}r"] = rate
            need = c.target - c.slack - rad_ind
            ok = bool((rate >= need).all())
            worst = int(np.argmin(rate - need))
            report.checks.append(
                (f"Pr[d<={c.factor:g}r]>=target", ok,
                 f"worst client {worst}: {rate[worst]:.4f} vs "
                 f"{c.target[worst]:.4f}-{c.slack}-{rad_ind:.4f}"))
        elif isinstance(c, MeanAtMost):
            rad = hoeffding_radius(n_samples, 1.0) * c.hard_factor * c.r \
                + c.slack
            report.radii[f"mean_{c.factor:g}r"] = rad
            bound = c.factor * c.r + rad
            ok = bool((mean_d <= bound).all())
            worst = int(np.argmax(mean_d - bound))
            report.checks.append(
                (f"E[d]<={c.factor:g}r", ok,
                 f"worst client {worst}: {mean_d[worst]:.4f} vs "
                 f"{bound[worst]:.4f}"))
    return report


# ------------------------------------------------------------ exact oracle


@dataclass
class OracleResult:
    feasible: bool
    value: float                  # max-min coverage ratio / min-max e-ratio
    lottery: list                 # [(frozenset, prob), ...] achieving it
    per_client: np.ndarray | None = None


def _ksubsets(instance):
    n = instance.n_facilities
    subs = list(combinations(range(n), instance.k))
    if len(subs) > 2000:
        raise InputError(f"{len(subs)} k-subsets exceed the oracle cap")
    return subs


def oracle_best_lottery(instance, objective, demand):
    """Exact LP over all k-subsets.

    objective="chance": maximize lambda with Pr[d(j,S) <= r_j] >= lambda*p_j;
    feasible demands have value >= 1.
    objective="expected": minimize lambda with E[d(j,S)] <= lambda*t_j;
    feasible demands have value <= 1.
    """
    subs = _ksubsets(instance)
    ns = len(subs)
    D = instance.D
    dist_per_sub = np.array([D[list(s), :].min(axis=0) for s in subs])
    nc = instance.n_clients

    if objective == "chance":
        covered = dist_per_sub <= demand.r[None, :]
        act = [j for j in range(nc) if demand.p[j] > 0]
        if not act:
            return OracleResult(True, math.inf,
                                [(frozenset(subs[0]), 1.0)])
        # vars: q_1..q_ns, lambda; maximize lambda
        a_ub, b_ub = [], []
        for j in act:
            row = np.zeros(ns + 1)
            row[:ns] = -covered[:, j].astype(float)
            row[ns] = demand.p[j]
            a_ub.append(row)
            b_ub.append(0.0)
        a_eq = [np.concatenate([np.ones(ns), [0.0]])]
        b_eq = [1.0]
        c = np.zeros(ns + 1)
        c[ns] = 1.0
        res = solve_lp(c, a_ub, b_ub, a_eq, b_eq, maximize=True)
        if not res.feasible:
            return OracleResult(False, -math.inf, [])
        q = res.x[:ns]
        val = float(res.x[ns])
        per = np.array([float(q @ covered[:, j]) for j in range(nc)])
        lott = [(frozenset(subs[i]), float(q[i]))
                for i in np.flatnonzero(q > 1e-12)]
        return OracleResult(True, val, lott, per)

    if objective == "expected":
        a_ub, b_ub = [], []
        for j in range(nc):
            row = np.zeros(ns + 1)
            row[:ns] = dist_per_sub[:, j]
            row[ns] = -demand.t[j]
            a_ub.append(row)
            b_ub.append(0.0)
        a_eq = [np.concatenate([np.ones(ns), [0.0]])]
        b_eq = [1.0]
        c = np.zeros(ns + 1)
        c[ns] = 1.0
        res = solve_lp(c, a_ub, b_ub, a_eq, b_eq, maximize=False)
        if not res.feasible:
            return OracleResult(False, math.inf, [])
        q = res.x[:ns]
        val = float(res.x[ns])
        per = np.array([float(q @ dist_per_sub[:, j]) for j in range(nc)])
        lott = [(frozenset(subs[i]), float(q[i]))
                for i in np.flatnonzero(q > 1e-12)]
        return OracleResult(True, val, lott, per)

    raise InputError(f"unknown oracle objective {objective!r}")


# --------------------------------------------------------------- generators


def gen_instance(kind, params, seed):
    """Deterministic instance generators.

    kinds: euclidean, random_metric (shortest-path closure of a random
    complete graph), uniform_gadget (all pairwise distances 1, SCC), star
    (hub-and-spoke shortest-path metric, SCC).
    """
    gen = as_source(seed).stream("gen", 0)
    p = dict(params)
    k = int(p.get("k", 1))
    if kind == "euclidean":
        scc = bool(p.get("scc", False))
        dim = int(p.get("dim", 2))
        if scc:
            pts = gen.random((int(p["n"]), dim))
            return Instance.from_euclidean(pts, pts, k, scc=True)
        fp = gen.random((int(p["n_facilities"]), dim))
        cp = gen.random((int(p["n_clients"]), dim))
        return Instance.from_euclidean(fp, cp, k)
    if kind == "random_metric":
        scc = bool(p.get("scc", False))
        if scc:
            n = int(p["n"])
            nf = nc = n
        else:
            nf = int(p["n_facilities"])
            nc = int(p["n_clients"])
            n = nf + nc
        w = gen.uniform(0.5, 1.5, size=(n, n))
        w = (w + w.T) / 2.0
        np.fill_diagonal(w, 0.0)
        d = _metric_closure(w)
        labels = list(range(n))
        if scc:
            return Instance.from_matrix(labels, d, labels, labels, k, scc=True)
        return Instance.from_matrix(labels, d, labels[:nf], labels[nf:], k)
    if kind == "uniform_gadget":
        n = int(p["n"])
        d = np.ones((n, n)) - np.eye(n)
        labels = list(range(n))
        return Instance.from_matrix(labels, d, labels, labels, k, scc=True)
    if kind == "star":
        n_leaves = int(p["n_leaves"])
        w = gen.uniform(0.5, 1.5, size=n_leaves)
        n = n_leaves + 1
        d = np.zeros((n, n))
        for i in range(n_leaves):
            d[0, i + 1] = d[i + 1, 0] = w[i]
            for j in range(i + 1, n_leaves):
                d[i + 1, j + 1] = d[j + 1, i + 1] = w[i] + w[j]
        labels = list(range(n))
        return Instance.from_matrix(labels, d, labels, labels, k, scc=True)
    raise InputError(f"unknown generator kind {kind!r}")


def _metric_closure(w):
    d = w.copy()
    n = d.shape[0]
    for m in range(n):
        d = np.minimum(d, d[:, m][:, None] + d[m, :][None, :])
    return d
