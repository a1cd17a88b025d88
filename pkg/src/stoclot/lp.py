"""Linear-programming subsystem.

A dense, self-contained primal simplex (phase-1/phase-2 with Bland's rule for
anti-cycling) backs the two feasibility polytopes used by the rounding
algorithms:

* the *coverage* polytope: fractional openings ``b`` with unit box bounds,
  total mass exactly ``k``, and ball mass ``b(B(j, r_j)) >= p_j`` per client;
* the *expectation* polytope: openings plus a fractional assignment
  ``a[i,j] <= b[i]`` with per-client assignment cost at most ``t_j``.

The expectation polytope is solved in opening-space only: for a fixed ``b``
the cheapest valid assignment for client j fills the nearest facilities
first, and ``min-cost(b) <= t_j`` is equivalent (by LP duality) to the family
of linear cuts ``theta - sum_i b_i * max(0, theta - d(i,j)) <= t_j`` over the
breakpoints ``theta in {d(i,j)}``.  This keeps the variable count at |F|
instead of |F|(1+|C|); the assignment is reconstructed greedily afterwards.

Everything here is deterministic: fixed pivot order, no randomization.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, SolverError

PIVOT_TOL = 1e-9
RESIDUAL_TOL = 1e-8
MAX_PIVOTS = 10**6

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


# --------------------------------------------------------------------- core


@dataclass
class LpResult:
    status: str
    x: np.ndarray | None = None
    objective: float | None = None
    infeasibility: float | None = None

    @property
    def feasible(self):
        return self.status == OPTIMAL


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    piv = T[row]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * piv
    basis[row] = col


def _run_simplex(T, basis, cost, allowed, iter_budget):
    """Minimize cost over the tableau in place; Bland's rule throughout.

    ``allowed`` marks columns eligible to enter the basis.  Returns the
    remaining iteration budget, or raises on cap.  A row of reduced costs is
    recomputed from scratch each pass to avoid drift.
    """
    m = T.shape[0]
    while True:
        if iter_budget <= 0:
            raise SolverError("simplex iteration cap exceeded")
        cb = cost[basis]
        red = cost - cb @ T[:, :-1]
        red[basis] = 0.0
        enter = -1
        for j in np.flatnonzero(allowed):
            if red[j] < -PIVOT_TOL:
                enter = j
                break
        if enter < 0:
            return iter_budget
        colv = T[:, enter]
        best_row, best_ratio, best_var = -1, None, None
        for i in range(m):
            if colv[i] > PIVOT_TOL:
                ratio = T[i, -1] / colv[i]
                if (best_row < 0 or ratio < best_ratio - PIVOT_TOL
                        or (abs(ratio - best_ratio) <= PIVOT_TOL
                            and basis[i] < best_var)):
                    best_row, best_ratio, best_var = i, ratio, basis[i]
        if best_row < 0:
            raise _Unbounded()
        _pivot(T, basis, best_row, enter)
        iter_budget -= 1


class _Unbounded(Exception):
    pass


def solve_lp(c, a_ub=None, b_ub=None, a_eq=None, b_eq=None, maximize=False,
             max_pivots=MAX_PIVOTS):
    """Solve min (or max) c.x subject to a_ub x <= b_ub, a_eq x = b_eq, x >= 0."""
    c = np.asarray(c, dtype=float)
    n = c.size
    rows = []
    rhs = []
    n_slack = 0
    slack_cols = []
    if a_ub is not None and len(a_ub):
        a_ub = np.asarray(a_ub, dtype=float)
        b_ub = np.asarray(b_ub, dtype=float)
        n_slack = a_ub.shape[0]
        for i in range(n_slack):
            rows.append(a_ub[i])
            rhs.append(b_ub[i])
            slack_cols.append(i)
    if a_eq is not None and len(a_eq):
        a_eq = np.asarray(a_eq, dtype=float)
        b_eq = np.asarray(b_eq, dtype=float)
        for i in range(a_eq.shape[0]):
            rows.append(a_eq[i])
            rhs.append(b_eq[i])
            slack_cols.append(-1)
    m = len(rows)
    A = np.zeros((m, n + n_slack))
    b = np.array(rhs, dtype=float)
    si = 0
    for i, r in enumerate(rows):
        A[i, :n] = r
        if slack_cols[i] >= 0:
            A[i, n + si] = 1.0
            si += 1
    # normalize to b >= 0 (flips slack signs on those rows)
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    n_tot = n + n_slack
    # artificials for every row; slacks with +1 coefficient double as them
    art_needed = [i for i in range(m)
                  if not (slack_cols[i] >= 0 and not neg[i])]
    n_art = len(art_needed)
    T = np.zeros((m, n_tot + n_art + 1))
    T[:, :n_tot] = A
    T[:, -1] = b
    basis = np.empty(m, dtype=int)
    ai = 0
    for i in range(m):
        if i in set(art_needed):
            T[i, n_tot + ai] = 1.0
            basis[i] = n_tot + ai
            ai += 1
        else:
            basis[i] = n + slack_cols[i]

    budget = max_pivots
    # phase 1
    if n_art:
        cost1 = np.zeros(n_tot + n_art)
        cost1[n_tot:] = 1.0
        allowed = np.ones(n_tot + n_art, dtype=bool)
        try:
            budget = _run_simplex(T, basis, cost1, allowed, budget)
        except _Unbounded:  # pragma: no cover - phase 1 is bounded below by 0
            raise SolverError("phase-1 unbounded; inconsistent tableau")
        phase1 = float(cost1[basis] @ T[:, -1])
        if phase1 > RESIDUAL_TOL:
            return LpResult(INFEASIBLE, infeasibility=phase1)
        # drive leftover artificials out of the basis
        for i in range(m):
            if basis[i] >= n_tot:
                piv = -1
                for j in range(n_tot):
                    if abs(T[i, j]) > PIVOT_TOL:
                        piv = j
                        break
                if piv >= 0:
                    _pivot(T, basis, i, piv)
                else:
                    T[i, :] = 0.0  # redundant row
                    basis[i] = -1

    keep = basis != -1
    if not keep.all():
        T = T[keep]
        basis = basis[keep]

    cost2 = np.zeros(n_tot + n_art)
    cost2[:n] = -c if maximize else c
    allowed = np.zeros(n_tot + n_art, dtype=bool)
    allowed[:n_tot] = True
    try:
        _run_simplex(T, basis, cost2, allowed, budget)
    except _Unbounded:
        return LpResult(UNBOUNDED)
    x = np.zeros(n_tot + n_art)
    x[basis] = T[:, -1]
    obj = float(c @ x[:n])
    return LpResult(OPTIMAL, x=x[:n], objective=obj, infeasibility=0.0)


# --------------------------------------------------------- coverage polytope


@dataclass
class FractionalOpening:
    """A fractional opening vector over facilities with mass budget k."""

    b: np.ndarray
    k: int

    def mass(self):
        return float(self.b.sum())


def solve_chance_lp(instance, demand, objective="ball-mass"):
    """Find b in the coverage polytope, or report infeasibility.

    Box bounds 0 <= b_i <= 1, total mass exactly k, and for every client
    ``b(B(j, r_j)) >= p_j``.  Among feasible points a secondary objective
    (maximize sum_j p_j * b(B(j, r_j)), a heuristic that concentrates mass
    inside demanded balls) selects a deterministic vertex.

    Returns LpResult whose ``x`` (when feasible) is the opening vector;
    callers wrap it into :class:`FractionalOpening`.
    """
    nf = instance.n_facilities
    nc = instance.n_clients
    if demand.n != nc:
        raise InputError("demand length does not match client count")
    balls = [instance.ball(j, demand.r[j]) for j in range(nc)]
    for j in range(nc):
        if demand.p[j] > 0 and balls[j].size == 0:
            return LpResult(INFEASIBLE, infeasibility=float(demand.p[j]))

    a_ub = []
    b_ub = []
    for j in range(nc):
        if demand.p[j] > 0:
            row = np.zeros(nf)
            row[balls[j]] = -1.0
            a_ub.append(row)
            b_ub.append(-float(demand.p[j]))
    a_ub.extend(np.eye(nf))
    b_ub.extend(np.ones(nf))
    a_eq = [np.ones(nf)]
    b_eq = [float(instance.k)]

    c = np.zeros(nf)
    if objective == "ball-mass":
        for j in range(nc):
            c[balls[j]] += demand.p[j]
    res = solve_lp(c, a_ub, b_ub, a_eq, b_eq, maximize=True)
    if res.feasible:
        b = np.clip(res.x, 0.0, 1.0)
        _check_chance_residuals(instance, demand, b, balls)
        res.x = b
    return res


def _check_chance_residuals(instance, demand, b, balls):
    for j in range(instance.n_clients):
        if b[balls[j]].sum() < demand.p[j] - RESIDUAL_TOL:
            raise SolverError(f"coverage row for client {j} violated")
    if abs(b.sum() - instance.k) > RESIDUAL_TOL:
        raise SolverError("total-mass row violated")


# ------------------------------------------------------ expectation polytope


@dataclass
class AssignmentFractional:
    """Fractional assignment a[i, j] with unit column sums and a <= b."""

    a: np.ndarray  # |F| x |C|


def greedy_assignment(instance, b, j):
    """Cheapest unit assignment for client j under capacities b (nearest-first)."""
    order = np.lexsort((np.arange(instance.n_facilities), instance.D[:, j]))
    a = np.zeros(instance.n_facilities)
    need = 1.0
    for i in order:
        if need <= 0.0:
            break
        take = min(float(b[i]), need)
        a[i] = take
        need -= take
    if need > RESIDUAL_TOL:
        raise InputError("opening vector has total mass below 1")
    return a


def solve_expectation_lp(instance, demand):
    """Find (b, a) in the expectation polytope, or report infeasibility.

    Solved over b only via the duality cuts described in the module
    docstring; ``a`` is reconstructed nearest-first, which realizes the
    cheapest assignment compatible with b and therefore satisfies the cost
    row whenever the cuts do.

    Returns (LpResult, AssignmentFractional | None).
    """
    nf = instance.n_facilities
    nc = instance.n_clients
    if demand.n != nc:
        raise InputError("demand length does not match client count")
    t = demand.t

    a_ub = []
    b_ub = []
    for j in range(nc):
        dj = instance.D[:, j]
        for theta in np.unique(dj):
            if theta <= t[j]:
                continue  # cut is vacuous: theta - anything <= theta <= t_j
            a_ub.append(-np.maximum(0.0, theta - dj))
            b_ub.append(float(t[j] - theta))
    row = -np.ones(nf)
    a_ub.append(row)
    b_ub.append(-1.0)
    a_ub.extend(np.eye(nf))
    b_ub.extend(np.ones(nf))
    a_ub.append(np.ones(nf))
    b_ub.append(float(instance.k))

    res = solve_lp(np.zeros(nf), a_ub, b_ub)
    if not res.feasible:
        return res, None
    b = np.clip(res.x, 0.0, 1.0)
    a = np.zeros((nf, nc))
    for j in range(nc):
        a[:, j] = greedy_assignment(instance, b, j)
        cost = float(a[:, j] @ instance.D[:, j])
        if cost > t[j] + RESIDUAL_TOL:
            raise SolverError(f"assignment cost row for client {j} violated")
    res.x = b
    return res, AssignmentFractional(a)


# ----------------------------------------------------------------- lp dumps


def dump_lp_text(c, a_ub, b_ub, a_eq, b_eq, maximize=False):
    """Render the LP in textual LP format for external cross-checks."""
    def expr(row):
        terms = [f"{'+' if v >= 0 else '-'} {abs(v):.17g} x{i}"
                 for i, v in enumerate(row) if v != 0.0]
        return " ".join(terms) if terms else "0 x0"

    lines = ["Maximize" if maximize else "Minimize", f" obj: {expr(c)}",
             "Subject To"]
    r = 0
    for row, rhs in zip(a_ub or [], b_ub or []):
        lines.append(f" c{r}: {expr(row)} <= {rhs:.17g}")
        r += 1
    for row, rhs in zip(a_eq or [], b_eq or []):
        lines.append(f" c{r}: {expr(row)} = {rhs:.17g}")
        r += 1
    lines.append("Bounds")
    for i in range(len(c)):
        lines.append(f" 0 <= x{i}")
    lines.append("End")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------ splitting

SPLIT_TOL = 1e-12


@dataclass
class ClusterFamily:
    """Facility copies plus per-client clusters of prescribed mass.

    Copies are segments of each facility's fractional mass; the segment set
    is a global partition, so two clusters that contain the same copy share
    the same underlying mass, and un-splitting (summing copy masses per
    original facility) recovers the opening vector.
    """

    origin: np.ndarray           # copy index -> original facility index
    mass: np.ndarray             # copy index -> mass in [0, 1]
    clusters: list               # client -> sorted np.ndarray of copy indices
    target: np.ndarray           # client -> prescribed cluster mass
    mode: str = "shared"
    center_copy: np.ndarray = field(default=None)  # client -> copy idx or -1

    @property
    def n_copies(self):
        return self.origin.size

    def unsplit(self, n_facilities):
        b = np.zeros(n_facilities)
        np.add.at(b, self.origin, self.mass)
        return b

    def cluster_mass(self, j):
        return float(self.mass[self.clusters[j]].sum())

    def member_matrix(self):
        m = np.zeros((len(self.clusters), self.n_copies), dtype=np.uint8)
        for j, cl in enumerate(self.clusters):
            m[j, cl] = 1
        return m

    def intersection_matrix(self):
        m = self.member_matrix().astype(np.int32)
        return ((m @ m.T) > 0).astype(np.uint8)


def _scan_order(instance, j, ball):
    """Ball facilities in ascending distance; the client's own facility first
    among ties at distance zero (SCC), then least index."""
    d = instance.D[ball, j]
    own = np.ones(ball.size)
    if instance.scc:
        own[ball == j] = 0.0
    return ball[np.lexsort((ball, own, d))]


def split_facilities(instance, opening, targets, mode="shared",
                     ensure_center=None):
    """Split facility masses into copies and per-client clusters.

    ``targets`` is a list of (radius, mass) per client.  Per client the ball
    is scanned in ascending distance (ties by index) accumulating copy mass;
    the final facility is cut so the cluster hits the target mass exactly.

    mode="shared": clusters may share copies (one global cut set).
    mode="exclusive": mass is consumed once, in client-index order.

    ``ensure_center``: in the SCC setting, guarantee client j's own facility
    appears in its cluster (a zero-mass copy is created when b_j = 0).
    Defaults to the instance's scc flag.
    """
    b = np.asarray(opening, dtype=float)
    nf = instance.n_facilities
    nc = instance.n_clients
    if len(targets) != nc:
        raise InputError("one (radius, mass) target per client required")
    if ensure_center is None:
        ensure_center = instance.scc

    # per-client consumption levels c[j][i]
    consumption = [dict() for _ in range(nc)]
    if mode == "shared":
        for j in range(nc):
            r_j, m_j = targets[j]
            need = float(m_j)
            for i in _scan_order(instance, j, instance.ball(j, r_j)):
                if need <= SPLIT_TOL:
                    break
                take = float(b[i]) if b[i] < need else need
                if take > 0.0:
                    consumption[j][int(i)] = take
                    need -= take
            if need > SPLIT_TOL:
                raise InputError(
                    f"ball of client {instance.client_ids[j]} holds mass "
                    f"{m_j - need:.12g} < target {m_j:.12g}")
    elif mode == "exclusive":
        remaining = b.copy()
        for j in range(nc):
            r_j, m_j = targets[j]
            need = float(m_j)
            for i in _scan_order(instance, j, instance.ball(j, r_j)):
                if need <= SPLIT_TOL:
                    break
                take = float(remaining[i]) if remaining[i] < need else need
                if take > 0.0:
                    consumption[j][int(i)] = take
                    remaining[i] -= take
                    need -= take
            if need > SPLIT_TOL:
                raise InputError(
                    f"remaining ball mass for client {instance.client_ids[j]}"
                    f" is below target {m_j:.12g}")
    else:
        raise InputError(f"unknown split mode {mode!r}")

    # cut each facility's mass at every consumption level
    if mode == "shared":
        levels = [set() for _ in range(nf)]
        for j in range(nc):
            for i, c in consumption[j].items():
                levels[i].add(c)
    else:
        levels = [set() for _ in range(nf)]
        acc = np.zeros(nf)
        cum = [dict() for _ in range(nc)]  # client -> facility -> cut level
        for j in range(nc):
            for i, c in consumption[j].items():
                acc[i] += c
                levels[i].add(float(acc[i]))
                cum[j][i] = float(acc[i])

    origin = []
    mass = []
    seg_hi = []          # segment upper level, aligned with origin/mass
    copies_of = [[] for _ in range(nf)]
    for i in range(nf):
        cuts = sorted(v for v in levels[i] if 0.0 < v < b[i])
        edges = [0.0] + cuts + ([b[i]] if b[i] > 0.0 else [])
        for lo, hi in zip(edges, edges[1:]):
            if hi - lo <= 0.0:
                continue
            copies_of[i].append(len(origin))
            origin.append(i)
            mass.append(hi - lo)
            seg_hi.append(hi)

    clusters = []
    for j in range(nc):
        got = []
        if mode == "shared":
            for i, c in consumption[j].items():
                for ci in copies_of[i]:
                    if seg_hi[ci] <= c + SPLIT_TOL and mass[ci] > 0.0:
                        got.append(ci)
        else:
            for i, c in consumption[j].items():
                top = cum[j][i]
                for ci in copies_of[i]:
                    lo = seg_hi[ci] - mass[ci]
                    if top - c - SPLIT_TOL <= lo and seg_hi[ci] <= top + SPLIT_TOL \
                            and mass[ci] > 0.0:
                        got.append(ci)
        clusters.append(got)

    center_copy = np.full(nc, -1, dtype=int)
    if ensure_center:
        # every SCC cluster carries a copy of its own facility, zero-mass if
        # the opening vector has none to give
        for j in range(nc):
            if j >= nf:
                continue
            if not any(origin[ci] == j for ci in clusters[j]):
                clusters[j].append(len(origin))
                origin.append(j)
                mass.append(0.0)
                seg_hi.append(0.0)
    clusters = [np.array(sorted(cl), dtype=int) for cl in clusters]
    for j in range(nc):
        for ci in clusters[j]:
            if origin[ci] == j:
                center_copy[j] = ci
                break

    fam = ClusterFamily(
        origin=np.array(origin, dtype=int),
        mass=np.array(mass, dtype=float),
        clusters=clusters,
        target=np.array([m for _, m in targets], dtype=float),
        mode=mode,
        center_copy=center_copy,
    )
    for j in range(nc):
        got = fam.cluster_mass(j)
        if abs(got - targets[j][1]) > 1e-9:
            raise SolverError(
                f"cluster mass {got!r} for client {j} missed target "
                f"{targets[j][1]!r}")
    return fam
