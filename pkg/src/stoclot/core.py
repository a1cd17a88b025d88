"""Problem instances, demand vectors, and metric queries.

An :class:`Instance` holds the client set, the facility set, the metric, and
the budget ``k``. Facilities and clients are referenced by integer positions
everywhere inside the algorithms; external ids (arbitrary labels) only appear
at the JSON boundary.

Distance comparisons inside the algorithms are exact on the stored doubles.
The 1e-9 tolerance below is used only when *validating* that the input is a
metric, never in algorithm logic.
"""

import json
import warnings

import numpy as np

from .errors import InputError

VALIDATION_TOL = 1e-9

# Dense |points| x |points| storage up to this size; larger instances must be
# euclidean and compute distances on demand.
DENSE_LIMIT = 4096


class Instance:
    """A clustering instance: clients, facilities, metric, and budget k.

    Immutable after construction; safe to share across threads.
    """

    def __init__(self, fc_dist, ff_dist, cc_dist, k, scc,
                 facility_ids=None, client_ids=None, meta=None):
        self.D = np.asarray(fc_dist, dtype=float)          # |F| x |C|
        self.DFF = np.asarray(ff_dist, dtype=float)        # |F| x |F|
        self.DCC = np.asarray(cc_dist, dtype=float)        # |C| x |C|
        self.n_facilities = self.D.shape[0]
        self.n_clients = self.D.shape[1]
        self.k = int(k)
        self.scc = bool(scc)
        self.facility_ids = list(facility_ids) if facility_ids is not None \
            else list(range(self.n_facilities))
        self.client_ids = list(client_ids) if client_ids is not None \
            else list(range(self.n_clients))
        self.meta = dict(meta or {})
        self._fid_index = {f: i for i, f in enumerate(self.facility_ids)}
        self._cid_index = {c: j for j, c in enumerate(self.client_ids)}
        if not (1 <= self.k <= self.n_facilities):
            raise InputError(f"k={self.k} outside 1..{self.n_facilities}")
        if self.scc and self.facility_ids != self.client_ids:
            raise InputError("scc instance requires identical facility and client sets")
        self.D.setflags(write=False)
        self.DFF.setflags(write=False)
        self.DCC.setflags(write=False)

    # ---------------------------------------------------------------- build

    @classmethod
    def from_matrix(cls, labels, dist, facilities, clients, k, scc=False,
                    validate=True):
        """Build from a full point-to-point distance matrix.

        ``facilities`` and ``clients`` are lists of labels selecting rows of
        ``dist``.
        """
        dist = np.asarray(dist, dtype=float)
        if dist.shape != (len(labels), len(labels)):
            raise InputError("distance matrix shape does not match labels")
        pos = {lab: i for i, lab in enumerate(labels)}
        try:
            fi = np.array([pos[f] for f in facilities], dtype=int)
            ci = np.array([pos[c] for c in clients], dtype=int)
        except KeyError as e:
            raise InputError(f"unknown point label {e.args[0]!r}") from None
        if validate:
            _validate_metric(dist)
        inst = cls(dist[np.ix_(fi, ci)], dist[np.ix_(fi, fi)],
                   dist[np.ix_(ci, ci)], k, scc,
                   facility_ids=list(facilities), client_ids=list(clients))
        inst.meta["metric"] = {"type": "matrix", "labels": list(labels),
                               "d": dist}
        return inst

    @classmethod
    def from_euclidean(cls, facility_points, client_points, k, scc=False):
        fp = np.atleast_2d(np.asarray(facility_points, dtype=float))
        cp = np.atleast_2d(np.asarray(client_points, dtype=float))
        if fp.shape[1] != cp.shape[1]:
            raise InputError("facility/client points have different dimensions")

        def pdist(a, b):
            return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))

        inst = cls(pdist(fp, cp), pdist(fp, fp), pdist(cp, cp), k, scc)
        inst.meta["metric"] = {"type": "euclidean", "facilities": fp,
                               "clients": cp}
        return inst

    # ---------------------------------------------------------------- sizes

    @property
    def n_points(self):
        """|C u F|: clients and facilities counted once in the SCC setting."""
        if self.scc:
            return self.n_clients
        return self.n_clients + self.n_facilities

    # --------------------------------------------------------------- lookup

    def facility_index(self, fid):
        try:
            return self._fid_index[fid]
        except KeyError:
            raise InputError(f"unknown facility id {fid!r}") from None

    def client_index(self, cid):
        try:
            return self._cid_index[cid]
        except KeyError:
            raise InputError(f"unknown client id {cid!r}") from None

    # -------------------------------------------------------------- queries

    def ball(self, j, r):
        """All facility indices within closed distance r of client j."""
        if not 0 <= j < self.n_clients:
            raise InputError(f"client index {j} out of range")
        if r < 0:
            raise InputError("ball radius must be nonnegative")
        return np.flatnonzero(self.D[:, j] <= r)

    def nearest(self, j):
        """(closest facility index, distance).

        Ties broken by least facility index.  In the SCC setting the client's
        own facility (same position) wins with distance 0.
        """
        if not 0 <= j < self.n_clients:
            raise InputError(f"client index {j} out of range")
        if self.scc:
            return j, 0.0
        col = self.D[:, j]
        i = int(np.argmin(col))  # argmin returns the first minimizer
        return i, float(col[i])

    def theta(self, j):
        return self.nearest(j)[1]

    def thetas(self):
        if self.scc:
            return np.zeros(self.n_clients)
        return self.D.min(axis=0)

    def matched(self, j, open_facilities):
        """(facility, distance) of the open facility serving j.

        The matched facility is the closest open one, least index on ties.
        """
        idx = np.asarray(sorted(open_facilities), dtype=int)
        if idx.size == 0:
            raise InputError("service distance of an empty solution set")
        col = self.D[idx, j]
        a = int(np.argmin(col))
        return int(idx[a]), float(col[a])

    def service_distance(self, j, open_facilities):
        return self.matched(j, open_facilities)[1]

    def service_distances(self, open_facilities):
        """Vector of d(j, S) over all clients; S must be nonempty."""
        idx = np.asarray(sorted(open_facilities), dtype=int)
        if idx.size == 0:
            raise InputError("service distance of an empty solution set")
        return self.D[idx, :].min(axis=0)

    # ----------------------------------------------------------------- json

    def to_json_dict(self):
        m = self.meta.get("metric")
        if m is None:
            raise InputError("instance was not built from a serializable metric")
        if m["type"] == "matrix":
            metric = {"type": "matrix", "labels": m["labels"],
                      "d": np.asarray(m["d"]).tolist()}
        else:
            metric = {"type": "euclidean",
                      "facilities": np.asarray(m["facilities"]).tolist(),
                      "clients": np.asarray(m["clients"]).tolist()}
        return {"k": self.k, "scc": self.scc, "metric": metric,
                "facilities": list(self.facility_ids),
                "clients": list(self.client_ids)}

    @classmethod
    def from_json_dict(cls, obj, validate=True):
        try:
            metric = obj["metric"]
            k = obj["k"]
            scc = bool(obj.get("scc", False))
        except (KeyError, TypeError) as e:
            raise InputError(f"malformed instance JSON: {e}") from None
        if metric["type"] == "matrix":
            return cls.from_matrix(metric["labels"], metric["d"],
                                   obj["facilities"], obj["clients"], k,
                                   scc=scc, validate=validate)
        if metric["type"] == "euclidean":
            inst = cls.from_euclidean(metric["facilities"], metric["clients"],
                                      k, scc=scc)
            if "facilities" in obj:
                inst.facility_ids = list(obj["facilities"])
                inst._fid_index = {f: i for i, f in enumerate(inst.facility_ids)}
            if "clients" in obj:
                inst.client_ids = list(obj["clients"])
                inst._cid_index = {c: j for j, c in enumerate(inst.client_ids)}
            return inst
        raise InputError(f"unknown metric type {metric['type']!r}")

    def __repr__(self):
        kind = "SCC" if self.scc else "supplier"
        return (f"Instance({kind}, |F|={self.n_facilities}, "
                f"|C|={self.n_clients}, k={self.k})")


def _validate_metric(dist):
    d = np.asarray(dist, dtype=float)
    if (d < -VALIDATION_TOL).any():
        raise InputError("negative distances")
    if np.abs(np.diag(d)).max(initial=0.0) > VALIDATION_TOL:
        raise InputError("nonzero self-distance")
    if np.abs(d - d.T).max(initial=0.0) > VALIDATION_TOL:
        raise InputError("asymmetric distance matrix")
    n = d.shape[0]
    for m in range(n):
        if (d > d[:, m][:, None] + d[m, :][None, :] + VALIDATION_TOL).any():
            raise InputError(f"triangle inequality violated through point {m}")


class DemandChance:
    """Per-client coverage demand: serve j within radius r_j with prob >= p_j."""

    def __init__(self, p, r):
        self.p = np.asarray(p, dtype=float)
        self.r = np.asarray(r, dtype=float)
        if self.p.shape != self.r.shape:
            raise InputError("p and r must have equal length")
        if ((self.p < 0) | (self.p > 1)).any():
            raise InputError("probabilities must lie in [0,1]")
        if (self.r < 0).any():
            raise InputError("radii must be nonnegative")

    @property
    def n(self):
        return self.p.size

    def homogeneous_p(self):
        return bool(self.n == 0 or (self.p == self.p[0]).all())

    def homogeneous_r(self):
        return bool(self.n == 0 or (self.r == self.r[0]).all())

    @classmethod
    def uniform(cls, n, p, r):
        return cls(np.full(n, float(p)), np.full(n, float(r)))


class DemandExpected:
    """Per-client expected-distance demand: E[d(j,S)] <= t_j."""

    def __init__(self, t, instance=None):
        self.t = np.asarray(t, dtype=float)
        if (self.t < 0).any():
            raise InputError("expected-distance targets must be nonnegative")
        if instance is not None:
            theta = instance.thetas()
            if (self.t < theta - VALIDATION_TOL).any():
                bad = int(np.argmax(theta - self.t))
                warnings.warn(
                    f"target t_{bad}={self.t[bad]:.6g} is below the distance "
                    f"{theta[bad]:.6g} of the nearest facility; demand cannot "
                    "be feasible", stacklevel=2)

    @property
    def n(self):
        return self.t.size


def demands_to_json_dict(instance, chance=None, expected=None):
    out = {}
    if chance is not None:
        out["chance"] = [
            {"client": instance.client_ids[j], "p": float(chance.p[j]),
             "r": float(chance.r[j])}
            for j in range(chance.n)
        ]
    if expected is not None:
        out["expected"] = [
            {"client": instance.client_ids[j], "t": float(expected.t[j])}
            for j in range(expected.n)
        ]
    return out


def demands_from_json_dict(instance, obj):
    """Returns (DemandChance | None, DemandExpected | None)."""
    chance = expected = None
    if obj.get("chance"):
        p = np.zeros(instance.n_clients)
        r = np.zeros(instance.n_clients)
        seen = set()
        for row in obj["chance"]:
            j = instance.client_index(row["client"])
            p[j], r[j] = row["p"], row["r"]
            seen.add(j)
        if len(seen) != instance.n_clients:
            raise InputError("chance demands must cover every client")
        chance = DemandChance(p, r)
    if obj.get("expected"):
        t = np.zeros(instance.n_clients)
        seen = set()
        for row in obj["expected"]:
            j = instance.client_index(row["client"])
            t[j] = row["t"]
            seen.add(j)
        if len(seen) != instance.n_clients:
            raise InputError("expected demands must cover every client")
        expected = DemandExpected(t, instance)
    return chance, expected


def load_instance(path, validate=True):
    with open(path) as fh:
        return Instance.from_json_dict(json.load(fh), validate=validate)


def load_demands(path, instance):
    with open(path) as fh:
        return demands_from_json_dict(instance, json.load(fh))
