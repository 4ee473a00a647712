import itertools
from collections import Counter
from fractions import Fraction

import pytest

from pmmkit.audit import (
    EnumerationTooLarge,
    audit_plan_masks,
    check_mask_nonsingular,
    exhaustive_privacy_test,
    sampled_privacy_test,
    total_variation,
)
from pmmkit.storage import default_alpha
from pmmkit.strategy import make_baseline_plan, make_fpmm_plan, make_psmm_plan


def hand_view_distribution(theta, x, p):
    """V = 2, K = L = M = 1, T = 1 queries at one point, enumerated by hand.

    With d = (0, 1): q_v = z_v x + [v = theta].
    """
    counts = Counter()
    for z1, z2 in itertools.product(range(p), repeat=2):
        counts[((z1 * x + (theta == 1)) % p, (z2 * x + (theta == 2)) % p)] += 1
    return counts


def test_total_variation_oracle():
    a = hand_view_distribution(1, 2, 5)
    b = hand_view_distribution(2, 2, 5)
    assert total_variation(a, b) == 0
    assert total_variation(Counter({1: 1}), Counter({2: 1})) == 1
    assert total_variation(Counter({1: 1, 2: 1}), Counter({1: 1})) == Fraction(1, 2)


def test_psmm_single_server_private():
    report = exhaustive_privacy_test("psmm", {"V": 2, "T": 1}, modulus=5, alpha=(1, 2, 3))
    assert report.passed and report.subsets_checked == 3
    assert report.max_tv == 0


def test_psmm_collusion_beyond_t_leaks():
    report = exhaustive_privacy_test("psmm", {"V": 2, "T": 1}, modulus=5, alpha=(1, 2), subset_size=2)
    assert not report.passed and report.max_tv > 0


def test_psmm_t2_pairs_private():
    report = exhaustive_privacy_test("psmm", {"V": 2, "T": 2}, modulus=5, alpha=(1, 2, 3), subset_size=2)
    assert report.passed


def test_noiseless_reveals_index():
    report = exhaustive_privacy_test("psmm", {"V": 2, "T": 1}, modulus=5, alpha=(1, 2), noiseless=True)
    assert report.max_tv == 1


def test_responses_included():
    report = exhaustive_privacy_test("psmm", {"V": 2}, modulus=5, alpha=(1, 2), include_responses=True)
    assert report.passed


def test_secrecy_of_a():
    assert exhaustive_privacy_test("psmm-secrecy", {"S": 1}, modulus=5, alpha=(1, 2)).passed
    assert not exhaustive_privacy_test("psmm-secrecy", {"S": 1}, modulus=5, alpha=(1, 2), subset_size=2).passed


@pytest.mark.parametrize("protocol", ["fpmm", "baseline"])
def test_two_sided_protocols(protocol):
    params = {"R": 2, "V": 2, "T_A": 1, "T_B": 1}
    assert exhaustive_privacy_test(protocol, params, modulus=5, alpha=(1, 2)).passed
    leak = exhaustive_privacy_test(protocol, params, modulus=5, alpha=(1, 2), subset_size=2)
    assert leak.max_tv > 0


def test_enumeration_limit():
    with pytest.raises(EnumerationTooLarge):
        exhaustive_privacy_test("psmm", {"V": 3, "T": 3}, modulus=97, alpha=(1,), limit=1000)


def test_mask_checks():
    assert check_mask_nonsingular(default_alpha(8), 4, 3, 97).passed
    bad = check_mask_nonsingular([0, 1, 2], 1, 2, 97)
    assert not bad.passed and [0, 1] in bad.violations
    too_wide = check_mask_nonsingular([1, 2], 0, 3, 97)
    assert not too_wide.passed


@pytest.mark.parametrize(
    "plan",
    [
        make_psmm_plan(25, 2, 2, 2, 2, 2, 2),
        make_fpmm_plan(40, 2, 2, 2, 2, 2, 2, 1),
        make_baseline_plan(12, 2, 2, 2, 2, 1),
    ],
)
def test_plan_masks(plan):
    alpha = default_alpha(plan.N)
    report = audit_plan_masks(plan, alpha, 2**61 - 1, limit=10**4)
    assert report.passed and report.subsets_checked > 0


def test_sampled_agrees_with_threshold():
    params = {"V": 3, "T": 2}
    ok = sampled_privacy_test("psmm", params, modulus=97, subset_size=2, samples=20000, seed=1)
    assert ok.passed
    leak = sampled_privacy_test("psmm", params, modulus=97, subset_size=3, samples=20000, seed=1)
    assert not leak.passed
    assert not sampled_privacy_test("psmm", params, modulus=97, samples=2000, noiseless=True).passed


def test_report_dict():
    d = exhaustive_privacy_test("psmm", {"V": 2}, modulus=5, alpha=(1, 2)).to_dict()
    assert d["passed"] and d["mode"] == "exhaustive"
