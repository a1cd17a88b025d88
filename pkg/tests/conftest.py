import numpy as np
import pytest

from stoclot.core import DemandChance, Instance
from stoclot.verify import gen_instance


@pytest.fixture
def uniform4():
    """Four-point SCC gadget: every pairwise distance 1, budget 3."""
    return gen_instance("uniform_gadget", {"n": 4, "k": 3}, 0)


def line_instance(positions_f, positions_c, k, scc=False):
    fp = np.array(positions_f, dtype=float)[:, None]
    cp = np.array(positions_c, dtype=float)[:, None]
    return Instance.from_euclidean(fp, cp, k, scc=scc)


def random_scc(n, k, seed):
    return gen_instance("random_metric", {"n": n, "k": k, "scc": True}, seed)


def random_supplier(nf, nc, k, seed):
    return gen_instance("random_metric",
                        {"n_facilities": nf, "n_clients": nc, "k": k}, seed)


def empirical_coverage(instance, masks, r, factor=1.0):
    d = np.where(masks[:, :, None], instance.D[None, :, :], np.inf).min(axis=1)
    return (d <= factor * np.asarray(r)[None, :] + 1e-12).mean(axis=0)


def sample_distances(instance, masks):
    return np.where(masks[:, :, None], instance.D[None, :, :],
                    np.inf).min(axis=1)


def feasible_chance_demand(instance, gen, r=None):
    """A chance demand realized by an explicit lottery, hence feasible."""
    from itertools import combinations
    nf = instance.n_facilities
    subs = list(combinations(range(nf), instance.k))
    picks = gen.choice(len(subs), size=min(4, len(subs)), replace=False)
    probs = gen.dirichlet(np.ones(picks.size))
    if r is None:
        r = gen.uniform(0.3, 1.2, size=instance.n_clients) * instance.D.max()
    r = np.broadcast_to(np.asarray(r, dtype=float),
                        (instance.n_clients,)).copy()
    p = np.zeros(instance.n_clients)
    for w, s in zip(probs, picks):
        d = instance.D[list(subs[s]), :].min(axis=0)
        p += w * (d <= r)
    return DemandChance(np.clip(p, 0.0, 1.0), r)


def feasible_expected_demand(instance, gen, atoms=4, slack=1.0):
    """Expected-distance targets realized exactly by an explicit lottery."""
    from itertools import combinations
    nf = instance.n_facilities
    subs = list(combinations(range(nf), instance.k))
    picks = gen.choice(len(subs), size=min(atoms, len(subs)), replace=False)
    probs = gen.dirichlet(np.ones(picks.size))
    t = np.zeros(instance.n_clients)
    for w, s in zip(probs, picks):
        t += w * instance.D[list(subs[s]), :].min(axis=0)
    from stoclot.core import DemandExpected
    return DemandExpected(t * slack, instance)
