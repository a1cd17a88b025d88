# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; semantics mirror _pykernels.py operation for operation.

The two backends must consume the pre-drawn uniforms in the same order and
perform the same float operations so outputs are bit-identical.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef double SNAP = 1e-12
cdef double SUM_TOL = 1e-9
cdef double TOTAL_TOL = 5e-10

IMPL = "compiled"

cdef int C_OK = 0
cdef int C_NO_DIRECTION = 1
cdef int C_INVARIANT = 2
cdef int C_UNIFORMS = 3

STATUS_OK = C_OK
STATUS_NO_DIRECTION = C_NO_DIRECTION
STATUS_INVARIANT = C_INVARIANT
STATUS_UNIFORMS = C_UNIFORMS


cdef inline double _snap(double v) nogil:
    if v <= SNAP:
        return 0.0
    if v >= 1.0 - SNAP:
        return 1.0
    return v


def depround_batch(double[::1] y, double[:, ::1] uniforms,
                   cnp.uint8_t[:, ::1] out):
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t n_rows = uniforms.shape[0]
    cdef Py_ssize_t row, t, i, j, nfrac, cur, base_nfrac
    cdef double alpha, beta, u
    cdef double[::1] w = np.empty(n, dtype=np.float64)
    cdef double[::1] base = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t[::1] frac = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] base_frac = np.empty(n, dtype=np.intp)

    base_nfrac = 0
    for i in range(n):
        base[i] = _snap(y[i])
        if 0.0 < base[i] < 1.0:
            base_frac[base_nfrac] = i
            base_nfrac += 1

    with nogil:
        for row in range(n_rows):
            for i in range(n):
                w[i] = base[i]
            nfrac = base_nfrac
            for t in range(base_nfrac):
                frac[t] = base_frac[t]
            cur = 0
            while nfrac >= 2:
                i = frac[0]
                j = frac[1]
                alpha = 1.0 - w[i]
                if w[j] < alpha:
                    alpha = w[j]
                beta = w[i]
                if 1.0 - w[j] < beta:
                    beta = 1.0 - w[j]
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
                if not (0.0 < w[j] < 1.0):
                    for t in range(1, nfrac - 1):
                        frac[t] = frac[t + 1]
                    nfrac -= 1
                if not (0.0 < w[i] < 1.0):
                    for t in range(0, nfrac - 1):
                        frac[t] = frac[t + 1]
                    nfrac -= 1
            if nfrac == 1:
                i = frac[0]
                u = uniforms[row, cur]
                cur += 1
                w[i] = 1.0 if u < w[i] else 0.0
            for i in range(n):
                out[row, i] = 1 if w[i] > 0.5 else 0
    return np.asarray(out)


cdef double _cluster_sum(double* b, int* cl_ptr, int* cl_idx, int j) nogil:
    cdef double s = 0.0
    cdef int t
    for t in range(cl_ptr[j], cl_ptr[j + 1]):
        s += b[cl_idx[t]]
    return s


def iter_round_batch(double[::1] b0, int[::1] cl_ptr, int[::1] cl_idx,
                     int[::1] co_ptr, int[::1] co_idx,
                     cnp.uint8_t[:, ::1] member, cnp.uint8_t[:, ::1] inter,
                     double[::1] r, int k, double[:, ::1] uniforms,
                     cnp.uint8_t[:, ::1] open_mask,
                     cnp.uint8_t[:, ::1] ever_tight, cnp.int8_t[::1] status):
    cdef Py_ssize_t n_rows = uniforms.shape[0]
    cdef Py_ssize_t width = uniforms.shape[1]
    cdef int nc = <int> r.shape[0]
    cdef int nm = <int> b0.shape[0]
    cdef Py_ssize_t row

    cdef double[::1] b = np.empty(nm, dtype=np.float64)
    cdef double[::1] sums = np.empty(nc, dtype=np.float64)
    cdef int[::1] in_slack = np.empty(nc, dtype=np.int32)
    cdef int[::1] in_tight = np.empty(nc, dtype=np.int32)
    cdef int[::1] acount = np.empty(nm, dtype=np.int32)
    cdef int[::1] tcount = np.empty(nm, dtype=np.int32)

    with nogil:
        for row in range(n_rows):
            status[row] = _iter_round_one(
                &b0[0], &cl_ptr[0], &cl_idx[0], &co_ptr[0], &co_idx[0],
                member, inter, &r[0], k, &uniforms[row, 0], width,
                open_mask, ever_tight, row, nc, nm,
                &b[0], &sums[0], &in_slack[0], &in_tight[0],
                &acount[0], &tcount[0])
    return np.asarray(status)


cdef int _iter_round_one(double* b0, int* cl_ptr, int* cl_idx, int* co_ptr,
                         int* co_idx, cnp.uint8_t[:, ::1] member,
                         cnp.uint8_t[:, ::1] inter, double* r, int k,
                         double* U, Py_ssize_t width,
                         cnp.uint8_t[:, ::1] open_mask,
                         cnp.uint8_t[:, ::1] ever_tight, Py_ssize_t row,
                         int nc, int nm, double* b, double* sums,
                         int* in_slack, int* in_tight, int* acount,
                         int* tcount) nogil:
    cdef int i, j, t, v, z, i1, i2, single, first, second, a, bcopy, best
    cdef int n_slack, total_tight, z1, z2, cur
    cdef double total, dp, dm, u, delta, half, room, bm

    for i in range(nm):
        b[i] = _snap(b0[i])
        acount[i] = 0
        tcount[i] = 0
    for j in range(nc):
        in_slack[j] = 1
        in_tight[j] = 0
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
        while True:
            v = -1
            for j in range(nc):
                if in_slack[j] and (sums[j] <= SUM_TOL
                                    or sums[j] >= 1.0 - SUM_TOL):
                    v = j
                    break
            if v >= 0:
                break
            i1 = -1
            i2 = -1
            for j in range(nc):
                if not in_tight[j]:
                    continue
                a = -1
                bcopy = -1
                for t in range(cl_ptr[j], cl_ptr[j + 1]):
                    i = cl_idx[t]
                    if 0.0 < b[i] < 1.0:
                        if a < 0:
                            a = i
                        else:
                            bcopy = i
                            break
                if bcopy >= 0:
                    i1 = a
                    i2 = bcopy
                    break
            single = -1
            if i1 < 0:
                total_tight = 1 if total >= k - TOTAL_TOL else 0
                first = -1
                second = -1
                for i in range(nm):
                    if acount[i] > 0 and tcount[i] == 0 and 0.0 < b[i] < 1.0:
                        if first < 0:
                            first = i
                        else:
                            second = i
                            break
                if (not total_tight) and first >= 0:
                    single = first
                elif second >= 0:
                    i1 = first
                    i2 = second
                else:
                    return C_NO_DIRECTION
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
                dp = 1.0 - b[i1]
                if b[i2] < dp:
                    dp = b[i2]
                dm = b[i1]
                if 1.0 - b[i2] < dm:
                    dm = 1.0 - b[i2]
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
                return C_UNIFORMS
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

        in_slack[v] = 0
        n_slack -= 1
        if sums[v] >= 1.0 - SUM_TOL:
            in_tight[v] = 1
            ever_tight[row, v] = 1
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
        for z1 in range(nc):
            if not in_tight[z1]:
                continue
            if sums[z1] - 1.0 > 1e-6 or 1.0 - sums[z1] > 1e-6:
                return C_INVARIANT
            for z2 in range(z1 + 1, nc):
                if in_tight[z2] and inter[z1, z2]:
                    return C_INVARIANT
        for z in range(nc):
            if in_slack[z] and sums[z] > 1.0 + 1e-6:
                return C_INVARIANT
        if total > k + 1e-6:
            return C_INVARIANT

    for j in range(nc):
        if in_tight[j]:
            best = -1
            bm = -1.0
            for t in range(cl_ptr[j], cl_ptr[j + 1]):
                i = cl_idx[t]
                if b[i] > bm:
                    bm = b[i]
                    best = i
            if best >= 0:
                open_mask[row, best] = 1
    return C_OK


def pareto3_prune(cnp.int64_t[::1] c1, cnp.int64_t[::1] c2,
                  cnp.int64_t[::1] c3):
    """Keep-mask of triples not weakly dominated by another triple.

    Weak dominance: another triple >= on every axis and different somewhere.
    Exact duplicates keep one representative.
    """
    cdef Py_ssize_t n = c1.shape[0]
    out = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] keep = out
    if n == 0:
        return out.astype(bool)
    order_np = np.lexsort((np.asarray(c3), np.asarray(c2), np.asarray(c1)))
    cdef cnp.int64_t[::1] order = np.ascontiguousarray(order_np, dtype=np.int64)
    # drop exact duplicates (keep the last of each run)
    cdef cnp.int64_t[::1] a1 = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] a2 = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] a3 = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] src = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t m = 0, t, i
    with nogil:
        for t in range(n):
            i = order[t]
            if m > 0 and a1[m-1] == c1[i] and a2[m-1] == c2[i] \
                    and a3[m-1] == c3[i]:
                continue
            a1[m] = c1[i]; a2[m] = c2[i]; a3[m] = c3[i]; src[m] = i
            m += 1
    # sort unique triples by a1 desc, a2 desc, a3 desc
    o2_np = np.lexsort((-np.asarray(a3[:m]), -np.asarray(a2[:m]),
                        -np.asarray(a1[:m])))
    cdef cnp.int64_t[::1] o2 = np.ascontiguousarray(o2_np, dtype=np.int64)
    cdef cnp.int64_t maxc2 = 0
    for t in range(m):
        if a2[t] > maxc2:
            maxc2 = a2[t]
    cdef cnp.int64_t[::1] tree = np.full(maxc2 + 2, -1, dtype=np.int64)
    cdef Py_ssize_t gs, ge
    cdef cnp.int64_t run, pos, val
    cdef Py_ssize_t sz = maxc2 + 1
    with nogil:
        gs = 0
        while gs < m:
            ge = gs
            while ge < m and a1[o2[ge]] == a1[o2[gs]]:
                ge += 1
            run = -1
            for t in range(gs, ge):
                i = o2[t]
                # query suffix max over a2 >= a2[i] among earlier a1-groups
                pos = sz - a2[i]
                val = -1
                while pos > 0:
                    if tree[pos] > val:
                        val = tree[pos]
                    pos -= pos & (-pos)
                if val >= a3[i]:
                    pass  # dominated by a strictly-larger-a1 point
                elif run >= a3[i]:
                    pass  # dominated within the group (a2 sorted desc)
                else:
                    keep[src[i]] = 1
                if a3[i] > run:
                    run = a3[i]
            for t in range(gs, ge):
                i = o2[t]
                pos = sz - a2[i]
                val = a3[i]
                while pos <= sz:
                    if tree[pos] < val:
                        tree[pos] = val
                    pos += pos & (-pos)
            gs = ge
    return out.astype(bool)
