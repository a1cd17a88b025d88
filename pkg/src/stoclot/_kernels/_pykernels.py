"""Pure-Python kernels: reference semantics for the compiled extension.

Both backends are pure functions of (inputs, pre-drawn uniform arrays) and
must consume uniforms in exactly the same order, so that a fixed seed yields
bit-identical output regardless of which backend is active.  Cluster sums are
accumulated sequentially in index order for the same reason; do not replace
the explicit loops with numpy reductions.
"""

import numpy as np

SNAP = 1e-12       # coordinate integrality snap
SUM_TOL = 1e-9     # cluster-sum integrality detection
TOTAL_TOL = 5e-10  # strictly below SUM_TOL: a cluster kept fractional by
                   # SUM_TOL must leave visible slack in the total-mass row
IMPL = "python"

STATUS_OK = 0
STATUS_NO_DIRECTION = 1
STATUS_INVARIANT = 2
STATUS_UNIFORMS = 3


def _snap(v):
    if v <= SNAP:
        return 0.0
    if v >= 1.0 - SNAP:
        return 1.0
    return v


def depround_batch(y, uniforms, out):
    """Pairwise dependent rounding of y, one row of uniforms per sample.

    Repeatedly merges the two lowest-index fractional coordinates (i, j):
    with alpha = min(1-y_i, y_j), beta = min(y_i, 1-y_j), moves to
    (y_i + alpha, y_j - alpha) with probability beta/(alpha+beta), else to
    (y_i - beta, y_j + beta).  A single leftover fractional coordinate is
    resolved by an independent Bernoulli draw.
    """
    n = y.shape[0]
    n_rows = uniforms.shape[0]
    base = [float(_snap(v)) for v in y]
    base_frac = [i for i in range(n) if 0.0 < base[i] < 1.0]
    for row in range(n_rows):
        w = list(base)
        frac = list(base_frac)
        cur = 0
        while len(frac) >= 2:
            i, j = frac[0], frac[1]
            alpha = min(1.0 - w[i], w[j])
            beta = min(w[i], 1.0 - w[j])
            u = uniforms[row, cur]
            cur += 1
            if u * (alpha + beta) < beta:
                w[i] += alpha
                w[j] -= alpha
            else:
                w[i] -= beta
                w[j] += beta
            w[i] = _snap(w[i])
            w[j] = _snap(w[j])
            if not 0.0 < w[j] < 1.0:
                frac.pop(1)
            if not 0.0 < w[i] < 1.0:
                frac.pop(0)
        if frac:
            i = frac[0]
            u = uniforms[row, cur]
            cur += 1
            w[i] = 1.0 if u < w[i] else 0.0
        for i in range(n):
            out[row, i] = 1 if w[i] > 0.5 else 0
    return out


def iter_round_batch(b0, cl_ptr, cl_idx, co_ptr, co_idx, member, inter, r, k,
                     uniforms, open_mask, ever_tight, status):
    """Batch iterative cluster rounding.

    Starting from copy masses ``b0`` and per-client clusters, runs the
    unbiased nullspace walk until every cluster has been resolved: clusters
    whose mass reaches 1 become *tight* (and evict intersecting clusters of
    comparable radius), clusters whose mass reaches 0 are dropped.  One copy
    per final tight cluster is opened (largest mass, least index on ties).

    Uniform consumption: exactly one draw per walk step, rows independent.
    """
    n_rows = uniforms.shape[0]
    width = uniforms.shape[1]
    nc = r.shape[0]
    nm = b0.shape[0]
    for row in range(n_rows):
        st = _iter_round_one(
            b0, cl_ptr, cl_idx, co_ptr, co_idx, member, inter, r, k,
            uniforms[row], width, open_mask[row], ever_tight[row], nc, nm)
        status[row] = st
    return status


def _cluster_sum(b, cl_ptr, cl_idx, j):
    s = 0.0
    for t in range(cl_ptr[j], cl_ptr[j + 1]):
        s += b[cl_idx[t]]
    return s


def _iter_round_one(b0, cl_ptr, cl_idx, co_ptr, co_idx, member, inter, r, k,
                    U, width, open_row, tight_row, nc, nm):
    b = [float(_snap(v)) for v in b0]
    in_slack = [1] * nc
    in_tight = [0] * nc
    sums = [0.0] * nc
    acount = [0] * nm
    tcount = [0] * nm
    for j in range(nc):
        sums[j] = _cluster_sum(b, cl_ptr, cl_idx, j)
        for t in range(cl_ptr[j], cl_ptr[j + 1]):
            acount[cl_idx[t]] += 1
    total = 0.0
    for i in range(nm):
        if acount[i] > 0:
            total += b[i]
    cur = 0
    n_slack = nc

    while n_slack > 0:
        # ---- walk until some slack cluster's mass is integral
        while True:
            v = -1
            for j in range(nc):
                if in_slack[j] and (sums[j] <= SUM_TOL
                                    or sums[j] >= 1.0 - SUM_TOL):
                    v = j
                    break
            if v >= 0:
                break
            i1 = i2 = -1
            # a tight cluster with two fractional copies
            for j in range(nc):
                if not in_tight[j]:
                    continue
                a = bcopy = -1
                for t in range(cl_ptr[j], cl_ptr[j + 1]):
                    ci = cl_idx[t]
                    if 0.0 < b[ci] < 1.0:
                        if a < 0:
                            a = ci
                        else:
                            bcopy = ci
                            break
                if bcopy >= 0:
                    i1, i2 = a, bcopy
                    break
            single = -1
            if i1 < 0:
                total_tight = total >= k - TOTAL_TOL
                first = second = -1
                for i in range(nm):
                    if acount[i] > 0 and tcount[i] == 0 and 0.0 < b[i] < 1.0:
                        if first < 0:
                            first = i
                        else:
                            second = i
                            break
                if not total_tight and first >= 0:
                    single = first
                elif second >= 0:
                    i1, i2 = first, second
                else:
                    return STATUS_NO_DIRECTION
            # step bounds
            if single >= 0:
                dp = 1.0 - b[single]
                room = k - total
                if room < dp:
                    dp = room
                dm = b[single]
                for t in range(co_ptr[single], co_ptr[single + 1]):
                    j = co_idx[t]
                    if in_slack[j]:
                        if 1.0 - sums[j] < dp:
                            dp = 1.0 - sums[j]
                        if sums[j] < dm:
                            dm = sums[j]
            else:
                dp = min(1.0 - b[i1], b[i2])
                dm = min(b[i1], 1.0 - b[i2])
                for t in range(co_ptr[i1], co_ptr[i1 + 1]):
                    j = co_idx[t]
                    if in_slack[j] and not member[j, i2]:
                        if 1.0 - sums[j] < dp:
                            dp = 1.0 - sums[j]
                        if sums[j] < dm:
                            dm = sums[j]
                for t in range(co_ptr[i2], co_ptr[i2 + 1]):
                    j = co_idx[t]
                    if in_slack[j] and not member[j, i1]:
                        if sums[j] < dp:
                            dp = sums[j]
                        if 1.0 - sums[j] < dm:
                            dm = 1.0 - sums[j]
            if cur >= width:
                return STATUS_UNIFORMS
            u = U[cur]
            cur += 1
            delta = dp if u * (dp + dm) < dm else -dm
            if single >= 0:
                b[single] = _snap(b[single] + delta)
                total += delta
                for t in range(co_ptr[single], co_ptr[single + 1]):
                    j = co_idx[t]
                    sums[j] = _cluster_sum(b, cl_ptr, cl_idx, j)
            else:
                b[i1] = _snap(b[i1] + delta)
                b[i2] = _snap(b[i2] - delta)
                for t in range(co_ptr[i1], co_ptr[i1 + 1]):
                    j = co_idx[t]
                    sums[j] = _cluster_sum(b, cl_ptr, cl_idx, j)
                for t in range(co_ptr[i2], co_ptr[i2 + 1]):
                    j = co_idx[t]
                    sums[j] = _cluster_sum(b, cl_ptr, cl_idx, j)

        # ---- resolve v
        in_slack[v] = 0
        n_slack -= 1
        if sums[v] >= 1.0 - SUM_TOL:
            in_tight[v] = 1
            tight_row[v] = 1
            for t in range(cl_ptr[v], cl_ptr[v + 1]):
                tcount[cl_idx[t]] += 1
            half = r[v] / 2.0
            for z in range(nc):
                if z == v or not (in_tight[z] or in_slack[z]):
                    continue
                if inter[z, v] and r[z] >= half:
                    if in_tight[z]:
                        in_tight[z] = 0
                        for t in range(cl_ptr[z], cl_ptr[z + 1]):
                            tcount[cl_idx[t]] -= 1
                    else:
                        in_slack[z] = 0
                        n_slack -= 1
                    for t in range(cl_ptr[z], cl_ptr[z + 1]):
                        acount[cl_idx[t]] -= 1
        else:
            for t in range(cl_ptr[v], cl_ptr[v + 1]):
                acount[cl_idx[t]] -= 1
        total = 0.0
        for i in range(nm):
            if acount[i] > 0:
                total += b[i]
        # ---- structural invariants
        for z1 in range(nc):
            if not in_tight[z1]:
                continue
            if abs(sums[z1] - 1.0) > 1e-6:
                return STATUS_INVARIANT
            for z2 in range(z1 + 1, nc):
                if in_tight[z2] and inter[z1, z2]:
                    return STATUS_INVARIANT
        for z in range(nc):
            if in_slack[z] and sums[z] > 1.0 + 1e-6:
                return STATUS_INVARIANT
        if total > k + 1e-6:
            return STATUS_INVARIANT

    for j in range(nc):
        if in_tight[j]:
            best = -1
            bm = -1.0
            for t in range(cl_ptr[j], cl_ptr[j + 1]):
                ci = cl_idx[t]
                if b[ci] > bm:
                    bm = b[ci]
                    best = ci
            if best >= 0:
                open_row[best] = 1
    return STATUS_OK


def pareto3_prune(c1, c2, c3):
    """Keep-mask of triples not weakly dominated by another triple."""
    n = c1.size
    keep = np.zeros(n, dtype=bool)
    if n == 0:
        return keep
    order = np.lexsort((c3, c2, c1))
    a1s, a2s, a3s = c1[order], c2[order], c3[order]
    uniq = np.ones(n, dtype=bool)
    uniq[1:] = (np.diff(a1s) != 0) | (np.diff(a2s) != 0) | (np.diff(a3s) != 0)
    src = order[uniq]
    a1, a2, a3 = c1[src], c2[src], c3[src]
    m = a1.size
    o2 = np.lexsort((-a3, -a2, -a1))
    maxc2 = int(a2.max(initial=0))
    sz = maxc2 + 1
    tree = np.full(sz + 1, -1, dtype=np.int64)

    gs = 0
    while gs < m:
        ge = gs
        while ge < m and a1[o2[ge]] == a1[o2[gs]]:
            ge += 1
        run = -1
        for t in range(gs, ge):
            i = o2[t]
            pos = sz - int(a2[i])
            val = -1
            while pos > 0:
                if tree[pos] > val:
                    val = tree[pos]
                pos -= pos & (-pos)
            if val >= a3[i] or run >= a3[i]:
                pass
            else:
                keep[src[i]] = True
            if a3[i] > run:
                run = int(a3[i])
        for t in range(gs, ge):
            i = o2[t]
            pos = sz - int(a2[i])
            val = int(a3[i])
            while pos <= sz:
                if tree[pos] < val:
                    tree[pos] = val
                pos += pos & (-pos)
        gs = ge
    return keep
