import math

import numpy as np
import pytest

from nestassort.adversarial import (
    KL_CONSTANT,
    RHO,
    AdversarialSpec,
    build_adversarial_instance,
    calibrate_kl_constant,
    deviation_count,
    deviation_gap_check,
    kl_one_swap,
    kl_report,
    random_combination,
    swap_nest,
    two_type_instance,
)
from nestassort.model import expected_revenue, nest_revenue, nest_utility
from nestassort.optimize import CapExceededError, brute_force_full_space


def test_rho_value():
    assert RHO == pytest.approx(0.694774, abs=1e-6)


def test_rho_makes_both_sets_tie_without_noise():
    inst = two_type_instance(4, 0.0, [0])
    small = expected_revenue(inst, tuple((0, 1) for _ in range(4)))
    large = expected_revenue(inst, tuple((0, 1, 2) for _ in range(4)))
    assert small == pytest.approx(large, abs=1e-12)
    for i in range(4):
        assert nest_utility(inst, i, [0, 1]) ** 0.5 == pytest.approx(math.sqrt(2) / 4)
        assert nest_utility(inst, i, [0, 1, 2]) ** 0.5 == pytest.approx(math.sqrt(3) / 4)
        # with rest-of-market fixed, equal revenue contributions at the optimal lambda
        r_star = expected_revenue(inst, tuple((0, 1) for _ in range(4)))
        assert (nest_revenue(inst, i, [0, 1]) - r_star) * math.sqrt(2) == pytest.approx(
            (nest_revenue(inst, i, [0, 1, 2]) - r_star) * math.sqrt(3), abs=1e-12)


def test_nest_quantities():
    m, eps = 8, 0.05
    spec = AdversarialSpec(m, eps, type_a_set={0, 3})
    inst = build_adversarial_instance(spec)
    assert inst.gammas.tolist() == [0.5] * m
    assert np.all(inst.preferences > 0) and np.all(inst.preferences <= inst.c_v)
    assert nest_utility(inst, 0, [0, 1]) ** 0.5 == pytest.approx(math.sqrt(2) / m)
    assert nest_revenue(inst, 0, [0, 1]) == pytest.approx(0.9 + 0.1 * eps)
    assert nest_utility(inst, 1, [0, 1, 2]) ** 0.5 == pytest.approx(math.sqrt(3) / m)
    assert nest_revenue(inst, 1, [0, 1, 2]) == pytest.approx((1.8 + RHO - 0.2 * eps) / 3)


@pytest.mark.parametrize("kwargs", [dict(num_nests=6, epsilon=0.1), dict(num_nests=0, epsilon=0.1),
                                    dict(num_nests=4, epsilon=0.0), dict(num_nests=4, epsilon=1.0),
                                    dict(num_nests=8, epsilon=0.1, type_a_set={0})])
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        AdversarialSpec(**kwargs)


def test_small_instance_optimum_pattern():
    spec = AdversarialSpec(4, 0.05, type_a_set={2})
    comb, value = brute_force_full_space(build_adversarial_instance(spec), cap=2**12)
    assert comb == ((0, 1, 2), (0, 1, 2), (0, 1), (0, 1, 2))
    assert comb == spec.optimal_combination()
    assert deviation_count(spec, comb) == 0


def test_gap_report_exhaustive_and_single_agree():
    spec = AdversarialSpec(4, 0.05)
    full = deviation_gap_check(spec, mode="exhaustive")
    single = deviation_gap_check(spec, mode="single")
    assert full.passed and single.passed
    assert full.best_other_value == pytest.approx(single.best_other_value)
    assert full.min_swap_ratio > 0
    with pytest.raises(CapExceededError):
        deviation_gap_check(AdversarialSpec(8, 0.05), mode="exhaustive")
    with pytest.raises(ValueError):
        deviation_gap_check(spec, mode="nope")


def test_single_deviation_gap_positive():
    spec = AdversarialSpec(8, 0.05)
    inst = build_adversarial_instance(spec)
    best = spec.optimal_combination()
    nest = min(spec.type_a_set)
    moved = list(best)
    moved[nest] = (0, 1, 2)
    assert expected_revenue(inst, best) - expected_revenue(inst, moved) > 0
    assert deviation_count(spec, moved) == 1
    assert deviation_count(spec, best) == 0


def test_swap_gaps_halve_with_epsilon():
    for eps in (0.01, 0.005):
        a = deviation_gap_check(AdversarialSpec(8, eps))
        b = deviation_gap_check(AdversarialSpec(8, eps / 2))
        ga = {(d.nests, d.subsets): d.gap for d in a.deviations if d.swap}
        gb = {(d.nests, d.subsets): d.gap for d in b.deviations if d.swap}
        assert ga.keys() == gb.keys() and ga
        for key in ga:
            assert 0.4 <= gb[key] / ga[key] <= 0.6


def test_gap_report_permutation_invariant():
    a = deviation_gap_check(AdversarialSpec(8, 0.05, type_a_set={0, 1}))
    b = deviation_gap_check(AdversarialSpec(8, 0.05, type_a_set={5, 2}))
    assert a.min_ratio == pytest.approx(b.min_ratio)
    assert a.min_swap_ratio == pytest.approx(b.min_swap_ratio)
    assert a.optimal_value == pytest.approx(b.optimal_value)


def test_kl_basic_cases():
    spec = AdversarialSpec(8, 0.05)
    base = build_adversarial_instance(spec)
    other = swap_nest(spec, 3)
    rng = np.random.default_rng(0)
    comb = random_combination(8, rng)
    assert kl_one_swap(spec, base, base, comb) == 0.0
    emptied = list(comb)
    emptied[3] = ()
    assert kl_one_swap(spec, base, other, emptied) == pytest.approx(0.0, abs=1e-15)
    full = list(comb)
    full[3] = (0, 1, 2)
    assert kl_one_swap(spec, base, other, full) > 0
    with pytest.raises(ValueError):
        kl_one_swap(spec, base, build_adversarial_instance(AdversarialSpec(8, 0.05, type_a_set={2, 3})), comb)


def test_kl_support_mismatch_is_infinite():
    spec = AdversarialSpec(4, 0.1)
    base = build_adversarial_instance(spec)
    prefs = base.preferences.copy()
    prefs[0, 2] = 0.0
    cut = type(base)(base.revenues, prefs, base.gammas, base.c_v, padded=np.zeros_like(prefs, dtype=bool) | (prefs == 0))
    assert math.isinf(kl_one_swap(None, base, cut, tuple((0, 1, 2) for _ in range(4))))


def test_kl_scaling_bounded():
    for m in (4, 8, 16):
        for eps in (0.1, 0.05, 0.01):
            report = kl_report(AdversarialSpec(m, eps), random_offers=10, seed=m)
            assert report["kl_scaled_max"] <= 2 * KL_CONSTANT


def test_stored_constant_matches_sweep():
    # stored constant is the sweep maximum rounded up
    swept = calibrate_kl_constant(random_offers=5)
    assert swept <= KL_CONSTANT
    assert KL_CONSTANT - swept < 0.01
