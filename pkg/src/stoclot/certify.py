"""Numerical certification of the lottery expected-distance constants.

``certify_partial_bound`` upper-bounds the worst-case conditional expectation
of the partial-cluster sampler over every cluster profile: an integer count m
of full clusters (m >= M collapsed into one envelope case) and a nonincreasing
overlap chain u_1 >= ... >= u_L.  The chain maximum is taken over a grid of
cells; every monotone factor is evaluated at the cell endpoint that maximizes
it, so the result is a true upper bound over the continuous domain, unlike a
pointwise float scan.  A dynamic program over the chain levels carries three
product statistics plus the current cell; per cell, frontiers are quantized
upward onto a value lattice and Pareto-pruned, and states whose optimistic
completion (exponential majorants of all future factors) cannot reach a
scanned lower bound are dropped.

``certify_scc_bound`` certifies the center-shift sampler's constant by grid
maximization of its closed-form two-parameter bound with an analytic tail in
the integer parameter.
"""

import math
import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InputError, ResourceError
from .lottery import QDistribution

DEFAULT_TUPLE_CAP = 10**8


# ------------------------------------------------------------- direct eval


def _beta_tail(u_last, q_p):
    """sup over the discarded chain suffix of the center-miss product."""
    if u_last <= q_p:
        return 1.0 - u_last
    return math.exp(-(u_last - q_p) / (1.0 - q_p)) * (1.0 - q_p)


def rhat(m, u, q_f, q_p, cap_m=10):
    """Per-profile miss bound: chance of distance > 1 plus chance of > 2.

    ``u`` is the nonincreasing overlap chain (length L); ``m`` the full
    cluster count, capped at cap_m where the envelope case applies.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.size == 0:
        raise InputError("u must be a nonempty vector")
    if (np.diff(u) > 1e-12).any() or u[0] > 1 + 1e-12 or u[-1] < -1e-12:
        raise InputError("u must be nonincreasing within [0, 1]")
    if not 1 <= m <= cap_m:
        raise InputError(f"m must lie in 1..{cap_m}")
    qbar_p = 1.0 - q_p
    qbar_f = 1.0 - q_f
    alpha = math.exp(-qbar_p * u[-1])
    beta = _beta_tail(u[-1], q_p)
    for l in range(u.size - 1):
        alpha *= 1.0 - qbar_p * (u[l] - u[l + 1])
        beta *= (1.0 - u[l]) + qbar_p * u[l + 1]
    ubar1 = 1.0 - u[0]
    if m < cap_m:
        fterm = (1.0 - qbar_f * ubar1 / m) ** m
        gterm = (qbar_f * (1.0 - ubar1 / m)) ** m
    else:
        fterm = math.exp(-qbar_f * ubar1)
        gterm = qbar_f ** cap_m * math.exp(-ubar1)
    return fterm * alpha + gterm * beta


def expected_rhat(m, u, qdist, cap_m=10):
    return sum(p * rhat(m, u, qf, qp, cap_m)
               for (qf, qp), p in zip(qdist.atoms, qdist.probs))


# ---------------------------------------------------------------- DP pieces


@dataclass
class BoundCertificate:
    parameters: dict
    bound: float
    peak_tuples: int
    wall_time_s: float
    best_p: float | None = None
    lower_scan: float | None = None

    def to_json_dict(self):
        out = {"parameters": self.parameters, "bound": self.bound,
               "peak_tuples": self.peak_tuples,
               "wall_time_s": self.wall_time_s}
        if self.best_p is not None:
            out["best_p"] = self.best_p
        if self.lower_scan is not None:
            out["lower_scan"] = self.lower_scan
        return out


def _split_branches(qdist):
    """(p0, qf0, p1, qf1, qp1): the zero-partial-shift atom comes first."""
    zero = [i for i, (_, qp) in enumerate(qdist.atoms) if qp == 0.0]
    if len(qdist.atoms) > 2:
        raise InputError("the chain DP supports at most two shift atoms")
    if not zero:
        raise InputError("one shift atom must have zero partial shift")
    i0 = zero[0]
    p0 = float(qdist.probs[i0])
    qf0 = float(qdist.atoms[i0][0])
    if len(qdist.atoms) == 1:
        return p0, qf0, 0.0, 0.0, 0.0
    i1 = 1 - i0
    return (p0, qf0, float(qdist.probs[i1]), float(qdist.atoms[i1][0]),
            float(qdist.atoms[i1][1]))


def _assembly_tables(ubar1, cap_m, qf):
    """F (center-miss) and G (all-miss) coefficients per m at fixed ubar1."""
    qbar = 1.0 - qf
    ms = np.arange(1, cap_m + 1, dtype=float)
    f = np.where(ms < cap_m, (1.0 - qbar * ubar1 / ms) ** ms,
                 math.exp(-qbar * ubar1))
    g = np.where(ms < cap_m, (qbar * (1.0 - ubar1 / ms)) ** ms,
                 qbar ** cap_m * math.exp(-ubar1))
    return f, g


def scan_profile_value(levels=7, cap_m=10, qdist=None, grid=2.0**-5, beam=48):
    """Beam search over grid-point chains; exact evaluation, so the result is
    a valid lower bound on the profile supremum and on any certified bound."""
    if qdist is None:
        qdist = QDistribution.certified_default()
    p0, qf0, p1, qf1, qp1 = _split_branches(qdist)
    qbar1 = 1.0 - qp1
    n = int(round(1.0 / grid)) + 1
    pts = np.minimum(1.0, np.arange(n) * grid)
    a1 = np.exp(-qbar1 * pts)
    a2 = np.array([_beta_tail(x, qp1) for x in pts])
    a3 = np.exp(-pts)
    states = [(c, a1[c], a2[c], a3[c]) for c in range(n)]
    for _ in range(levels - 1):
        buckets = {}
        for (c, x1, x2, x3) in states:
            for d in range(c, n):
                f1 = 1.0 - qbar1 * (pts[d] - pts[c])
                f2 = 1.0 - pts[d] + qbar1 * pts[c]
                f3 = 1.0 - pts[d] + pts[c]
                buckets.setdefault(d, []).append((x1 * f1, x2 * f2, x3 * f3))
        states = []
        for d, lst in buckets.items():
            lst.sort(key=lambda s: -(s[0] + s[1] + 3.0 * s[2]))
            states.extend((d, *s) for s in lst[:beam])
    best = 0.0
    for (c, x1, x2, x3) in states:
        ubar1 = 1.0 - pts[c]
        f0, g0 = _assembly_tables(ubar1, cap_m, qf0)
        f1_, g1_ = _assembly_tables(ubar1, cap_m, qf1)
        vals = p0 * (f0 + g0) * x3 + p1 * (f1_ * x1 + g1_ * x2)
        best = max(best, float(vals.max()))
    return 1.0 + best


def certify_partial_bound(levels=7, cap_m=10, eps_grid=2.0**-12, qdist=None,
                          sweep_p=False, tuple_cap=DEFAULT_TUPLE_CAP,
                          value_quantum=None, progress=None, prune=True):
    """Upper bound on 1 + max over profiles of the expected miss bound.

    eps_grid must be a power of two.  value_quantum (default eps_grid/16)
    controls upward quantization of the carried statistics; both quantization
    and endpoint evaluation only increase the certified bound.
    """
    t0 = time.perf_counter()
    if qdist is None:
        qdist = QDistribution.certified_default()
    g = 1.0 / eps_grid
    if not (g == round(g) and (int(g) & (int(g) - 1)) == 0):
        raise InputError("eps_grid must be a power of two")
    if levels < 1 or cap_m < 1:
        raise InputError("levels and cap_m must be positive")
    ncells = int(g)
    if value_quantum is None:
        value_quantum = eps_grid / 16.0
    dq = float(value_quantum)
    p0, qf0, p1, qf1, qp1 = _split_branches(qdist)
    qbar1 = 1.0 - qp1
    eps = eps_grid

    lo = np.arange(ncells) * eps
    hi = np.minimum(1.0, lo + eps)

    # per-cell assembly maxima and suffix tables for the optimistic bound
    f0g0_max = np.zeros(ncells)
    f1_max = np.zeros(ncells)
    g1_max = np.zeros(ncells)
    for d in range(ncells):
        ub = max(0.0, 1.0 - hi[d])
        f0, g0 = _assembly_tables(ub, cap_m, qf0)
        f1_, g1_ = _assembly_tables(ub, cap_m, qf1)
        f0g0_max[d] = (f0 + g0).max()
        f1_max[d] = f1_.max()
        g1_max[d] = g1_.max()

    def suffix_max(v):
        return np.maximum.accumulate(v[::-1])[::-1]

    m0 = suffix_max(f0g0_max * np.exp(-lo))
    m1 = suffix_max(f1_max * np.exp(-qbar1 * lo))
    m2 = suffix_max(g1_max * np.exp(-lo))

    lb = (scan_profile_value(levels, cap_m, qdist) - 1.0 - 1e-9) if prune \
        else -math.inf

    def optimistic(cells, s1, s2, s3, rem):
        k3 = p0 * np.exp(lo[cells] + rem * eps) * m0[cells]
        k1 = p1 * np.exp(qbar1 * (lo[cells] + rem * eps)) * m1[cells]
        k2 = p1 * np.exp(qbar1 * lo[cells] + rem * eps) * m2[cells]
        return (k1 * s1 + k2 * s2 + k3 * s3) * dq

    # base level: the chain's smallest value, maximized at each cell floor
    st_c = np.arange(ncells, dtype=np.int32)
    st1 = np.ceil(np.exp(-qbar1 * lo) / dq).astype(np.int64)
    st2 = np.ceil(np.array([_beta_tail(x, qp1) for x in lo]) / dq).astype(np.int64)
    st3 = np.ceil(np.exp(-lo) / dq).astype(np.int64)
    if prune:
        keep = optimistic(st_c, st1, st2, st3, levels - 1) >= lb
        st_c, st1, st2, st3 = st_c[keep], st1[keep], st2[keep], st3[keep]
    peak = int(st1.size)

    for lev in range(levels - 1):
        rem = levels - 2 - lev
        order = np.argsort(st_c, kind="stable")
        st_c, st1, st2, st3 = (st_c[order], st1[order], st2[order],
                               st3[order])
        ends = np.searchsorted(st_c, np.arange(ncells), side="right")
        starts = np.searchsorted(st_c, np.arange(ncells), side="left")
        hi_src = hi[st_c]
        lo_src = lo[st_c]
        # per-source-bucket componentwise maxima: lets whole (source, target)
        # cell pairs be skipped when even their best child cannot reach lb
        bmax = np.zeros((ncells, 3))
        for c in range(ncells):
            sl = slice(starts[c], ends[c])
            if sl.start < sl.stop:
                bmax[c] = (st1[sl].max(), st2[sl].max(), st3[sl].max())
        cut = None
        if prune:
            cs = np.arange(ncells)
            k3v = p0 * np.exp(lo + rem * eps) * m0
            k1v = p1 * np.exp(qbar1 * (lo + rem * eps)) * m1
            k2v = p1 * np.exp(qbar1 * lo + rem * eps) * m2
            cut = np.zeros((ncells, ncells), dtype=bool)  # [d, c]
            for d in range(ncells):
                f1b = np.where(cs == d, 1.0,
                               1.0 - qbar1 * (lo[d] - hi[cs]))
                f2b = np.where(cs == d, 1.0 - qp1 * lo[cs],
                               (1.0 - lo[d]) + qbar1 * hi[cs])
                f3b = np.where(cs == d, 1.0, (1.0 - lo[d]) + hi[cs])
                top = (k1v[d] * bmax[:, 0] * np.maximum(f1b, 0.0)
                       + k2v[d] * bmax[:, 1] * np.maximum(f2b, 0.0)
                       + k3v[d] * bmax[:, 2] * np.maximum(f3b, 0.0)) \
                    * dq + 8 * dq
                cut[d] = top >= lb
        out_c, out1, out2, out3 = [], [], [], []
        for d in range(ncells):
            nd_end = starts[d]      # strictly-lower cells
            dg_end = ends[d]
            parts = []
            if nd_end > 0:
                if cut is not None:
                    ok_src = cut[d, st_c[:nd_end]]
                    idx = np.flatnonzero(ok_src)
                else:
                    idx = np.arange(nd_end)
                if idx.size:
                    f1 = 1.0 - qbar1 * (lo[d] - hi_src[idx])
                    f2 = (1.0 - lo[d]) + qbar1 * hi_src[idx]
                    f3 = (1.0 - lo[d]) + hi_src[idx]
                    parts.append((np.ceil(st1[idx] * f1),
                                  np.ceil(st2[idx] * f2),
                                  np.ceil(st3[idx] * f3)))
            if dg_end > nd_end and (cut is None or cut[d, d]):
                sl = slice(nd_end, dg_end)
                f2d = 1.0 - qp1 * lo_src[sl]
                parts.append((st1[sl].astype(float),
                              np.ceil(st2[sl] * f2d),
                              st3[sl].astype(float)))
            if not parts:
                continue
            c1 = np.concatenate([p[0] for p in parts]).astype(np.int64)
            c2 = np.concatenate([p[1] for p in parts]).astype(np.int64)
            c3 = np.concatenate([p[2] for p in parts]).astype(np.int64)
            cells_d = np.full(c1.size, d, dtype=np.int32)
            if prune:
                ok = optimistic(cells_d, c1, c2, c3, rem) >= lb
                c1, c2, c3 = c1[ok], c2[ok], c3[ok]
                if c1.size == 0:
                    continue
                kp = _kernels.pareto3_prune(c1, c2, c3)
                c1, c2, c3 = c1[kp], c2[kp], c3[kp]
            out_c.append(np.full(c1.size, d, dtype=np.int32))
            out1.append(c1)
            out2.append(c2)
            out3.append(c3)
        if not out_c:
            raise ResourceError("frontier emptied; lower-bound scan too high")
        st_c = np.concatenate(out_c)
        st1 = np.concatenate(out1)
        st2 = np.concatenate(out2)
        st3 = np.concatenate(out3)
        peak = max(peak, int(st1.size))
        if st1.size > tuple_cap:
            raise ResourceError(
                f"frontier grew to {st1.size} tuples; coarsen eps_grid")
        if progress is not None:
            progress(lev, int(st1.size))

    best = -math.inf
    pool = None
    order = np.argsort(st_c, kind="stable")
    st_c, st1, st2, st3 = st_c[order], st1[order], st2[order], st3[order]
    ends = np.searchsorted(st_c, np.arange(ncells), side="right")
    starts = np.searchsorted(st_c, np.arange(ncells), side="left")
    for d in range(ncells):
        sl = slice(starts[d], ends[d])
        if sl.start == sl.stop:
            continue
        ub = max(0.0, 1.0 - hi[d])
        f0, g0 = _assembly_tables(ub, cap_m, qf0)
        f1_, g1_ = _assembly_tables(ub, cap_m, qf1)
        a1v, a2v, a3v = st1[sl] * dq, st2[sl] * dq, st3[sl] * dq
        v0 = (f0 + g0)[:, None] * a3v[None, :]
        v1 = f1_[:, None] * a1v[None, :] + g1_[:, None] * a2v[None, :]
        best = max(best, float((p0 * v0 + p1 * v1).max()))
        if sweep_p:
            pts = np.stack([v0.ravel(), v1.ravel()], axis=1)
            pool = pts if pool is None else np.vstack([pool, pts])
            pool = _pareto2(pool)

    bound = 1.0 + best
    best_p = None
    if sweep_p and pool is not None:
        best_p, swept = _min_over_p(pool)
        bound = 1.0 + swept
    wall = time.perf_counter() - t0
    return BoundCertificate(
        parameters={"levels": levels, "cap_m": cap_m, "eps_grid": eps_grid,
                    "value_quantum": dq, "qdist": qdist.to_json_dict(),
                    "sweep_p": sweep_p},
        bound=bound, peak_tuples=peak, wall_time_s=wall, best_p=best_p,
        lower_scan=lb + 1.0)


def _pareto2(pts):
    order = np.lexsort((-pts[:, 1], -pts[:, 0]))
    pts = pts[order]
    best1 = np.maximum.accumulate(pts[:, 1])
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = pts[1:, 1] >= best1[:-1]
    return pts[keep]


def _min_over_p(pts):
    """Minimize over p in [0,1] the max of p*V0 + (1-p)*V1 over the points."""
    def val(p):
        return float(np.max(p * pts[:, 0] + (1 - p) * pts[:, 1]))

    cand = {0.0, 1.0}
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            d0 = pts[i, 0] - pts[j, 0]
            d1 = pts[i, 1] - pts[j, 1]
            den = d0 - d1
            if abs(den) > 1e-14:
                p = -d1 / den
                if 0.0 < p < 1.0:
                    cand.add(float(p))
    best_p = min(cand, key=val)
    return best_p, val(best_p)


# ----------------------------------------------------------- scc constant


def certify_scc_bound(q=0.464587, s_grid=2.0**-20, t_max=64):
    """Upper bound on the center-shift sampler's expectation constant.

    Maximizes 1 + e^{s-1}((1 - qbar*s/t)^t + qbar^t (1 - s/t)^t) over
    s in [0,1] and integer t >= 1; the factors are monotone in s, so each
    grid cell is bounded by mixed-endpoint evaluation, and t > t_max uses the
    monotone limit (1 - qbar*s/t)^t -> e^{-qbar*s} plus a geometric tail.
    """
    if not 0 <= q <= 1:
        raise InputError("q must lie in [0, 1]")
    qbar = 1.0 - q
    ncells = int(round(1.0 / s_grid))
    lo = np.arange(ncells) * s_grid
    hi = np.minimum(1.0, lo + s_grid)
    env = np.exp(hi - 1.0)
    best = 0.0
    for t in range(1, t_max + 1):
        v = env * ((1.0 - qbar * lo / t) ** t
                   + qbar ** t * (1.0 - lo / t) ** t)
        best = max(best, float(v.max()))
    tail = env * (np.exp(-qbar * lo) + qbar ** (t_max + 1) * np.exp(-lo))
    best = max(best, float(tail.max()))
    return 1.0 + best
