import itertools
import math

import numpy as np
import pytest

from conftest import (feasible_expected_demand, line_instance, random_scc,
                      random_supplier)
from stoclot import determinize
from stoclot.core import DemandExpected
from stoclot.errors import InputError
from stoclot.verify import gen_instance


def test_scalefree_beta_formula():
    assert determinize.scalefree_beta(2.0, scc=False) == 4.0
    assert determinize.scalefree_beta(2.0, scc=True) == 4.0
    assert determinize.scalefree_beta(100.0, scc=False) == 3.0
    assert determinize.scalefree_beta(100.0, scc=True) == pytest.approx(
        200 / 99)
    with pytest.raises(InputError):
        determinize.scalefree_beta(1.0, scc=False)


def test_scalefree_bounds_on_random_instances():
    gen = np.random.default_rng(0)
    for seed in range(4):
        for alpha in (1.5, 2.0, 3.0, 100.0):
            inst = random_supplier(7, 6, 2, 110 + seed)
            dem = feasible_expected_demand(inst, gen, slack=1.05)
            det = determinize.determinize_scalefree(inst, dem, alpha)
            assert len(det.open_set) <= alpha * inst.k
            beta = determinize.scalefree_beta(alpha, inst.scc)
            d = inst.service_distances(det.open_set)
            assert (d <= beta * dem.t + 1e-9).all()
            assert det.beta_achieved <= beta + 1e-9


def test_scalefree_scc_tighter_beta():
    gen = np.random.default_rng(1)
    for seed in range(3):
        inst = random_scc(8, 2, 120 + seed)
        dem = feasible_expected_demand(inst, gen, slack=1.05)
        det = determinize.determinize_scalefree(inst, dem, 2.0)
        d = inst.service_distances(det.open_set)
        assert (d <= 4.0 * dem.t + 1e-9).all()  # 2a/(a-1) at a=2


def test_scalefree_alpha_limit_approaches_three():
    gen = np.random.default_rng(2)
    inst = random_supplier(8, 6, 2, 130)
    dem = feasible_expected_demand(inst, gen, slack=1.05)
    det = determinize.determinize_scalefree(inst, dem, 100.0)
    d = inst.service_distances(det.open_set)
    assert (d <= 3.0 * dem.t + 1e-9).all()


def test_scalefree_degenerate_targets():
    # t = theta forces zero-radius clusters; the opened set serves every
    # client at exactly its nearest-facility distance
    inst = random_supplier(5, 5, 5, 7)
    t = inst.thetas()
    dem = DemandExpected(t, inst)
    det = determinize.determinize_scalefree(inst, dem, 2.0)
    d = inst.service_distances(det.open_set)
    assert np.allclose(d, t, atol=1e-9)


def test_logblowup_validation_and_bounds():
    gen = np.random.default_rng(3)
    inst = random_supplier(6, 5, 2, 140)
    dem = feasible_expected_demand(inst, gen, slack=1.1)
    with pytest.raises(InputError):
        determinize.determinize_logblowup(inst, dem, 0.7, 0)
    det = determinize.determinize_logblowup(inst, dem, 0.4, 0)
    n = inst.n_points
    assert len(det.open_set) <= math.ceil(3 * inst.k * math.log(n) / 0.4)
    d = inst.service_distances(det.open_set)
    assert (d <= 1.4 * dem.t + 1e-9).all()


def test_logblowup_saturated_probabilities():
    # tiny eps saturates p = 1 for every positive opening: deterministic
    inst = random_supplier(6, 5, 3, 141)
    gen = np.random.default_rng(4)
    dem = feasible_expected_demand(inst, gen, slack=1.2)
    a = determinize.determinize_logblowup(inst, dem, 0.45, 5)
    b = determinize.determinize_logblowup(inst, dem, 0.45, 5)
    assert a.open_set == b.open_set


def test_logblowup_random_instances_retry_budget():
    gen = np.random.default_rng(5)
    ok = 0
    for seed in range(10):
        inst = random_supplier(12, 10, 3, 150 + seed)
        dem = feasible_expected_demand(inst, gen, slack=1.1)
        det = determinize.determinize_logblowup(inst, dem, 0.3, seed)
        d = inst.service_distances(det.open_set)
        assert (d <= 1.3 * dem.t + 1e-9).all()
        ok += 1
    assert ok == 10


def test_exact_k_two_point_gadget():
    inst = gen_instance("uniform_gadget", {"n": 2, "k": 1}, 0)
    dem = DemandExpected([0.5, 0.5], inst)
    det = determinize.determinize_exact_k(inst, dem)
    assert not isinstance(det, determinize.InfeasibilityWitness)
    assert len(det.open_set) <= 1
    d = inst.service_distances(det.open_set)
    assert (d <= 3 * 0.5 + 1e-12).all()  # (k+2) t with k = 1


def test_exact_k_huge_targets_single_pick():
    inst = random_supplier(6, 5, 2, 160)
    t = np.full(5, inst.D.max() + 1.0)
    det = determinize.determinize_exact_k(inst, DemandExpected(t, inst))
    assert len(det.open_set) == 1


def test_exact_k_on_lottery_derived_targets():
    gen = np.random.default_rng(6)
    for seed in range(6):
        inst = random_supplier(10, 8, 3, 170 + seed)
        dem = feasible_expected_demand(inst, gen)
        det = determinize.determinize_exact_k(inst, dem)
        assert not isinstance(det, determinize.InfeasibilityWitness)
        assert len(det.open_set) <= 3
        d = inst.service_distances(det.open_set)
        assert (d <= (inst.k + 2) * dem.t + 1e-9).all()


def test_exact_k_witness_on_infeasible():
    # uniform gadget with targets far below the achievable 1/(k+1)
    k = 2
    inst = gen_instance("uniform_gadget", {"n": k + 1, "k": k}, 0)
    dem = DemandExpected(np.full(k + 1, 1e-4), inst)
    out = determinize.determinize_exact_k(inst, dem)
    assert isinstance(out, determinize.InfeasibilityWitness)
    assert not out
    assert len(out.clients) == k + 1


def test_observation_gadget_lower_bound_small():
    # no determinization can beat (alpha k + 1)/((alpha-1) k + 1) on the
    # uniform gadget with the exactly-achievable targets
    for k, alpha in [(1, 2), (2, 2)]:
        kp = alpha * k
        inst = gen_instance("uniform_gadget", {"n": kp + 1, "k": k}, 0)
        t = ((alpha - 1) * k + 1) / (alpha * k + 1)
        target = (alpha * k + 1) / ((alpha - 1) * k + 1)
        best = math.inf
        for size in range(1, kp + 1):
            for s in itertools.combinations(range(kp + 1), size):
                d = inst.service_distances(set(s))
                best = min(best, float(d.max() / t))
        assert best >= target - 1e-9
