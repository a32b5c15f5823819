import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pweight import distfn
from pweight.errors import ContractError
from pweight.hypotheses import RejectionSet, TestBattery, WeightVector
from pweight.procedures import (
    adjusted_pvalues,
    bh,
    bh_asymptotic_threshold,
    bonferroni,
    weighted_bh,
    weighted_bonferroni,
    weighted_holm,
    weighted_pvalues,
)

P_GRID = (0.0, 0.001, 0.01, 0.0125, 0.02, 0.025, 0.04, 0.05, 0.3, 1.0)


def brute_holm(p, w, alpha):
    """Reference weighted Holm written as a plain loop over hypotheses."""
    m = len(p)
    alive = set(range(m))
    rejected = set()
    while alive:
        total = sum(w[j] for j in alive)
        best = min(alive, key=lambda j: (p[j] / w[j] if w[j] > 0 else np.inf, j))
        if w[best] > 0 and p[best] <= alpha * w[best] / min(total, m):
            rejected.add(best)
            alive.remove(best)
        else:
            break
    return rejected


def brute_bh(q, alpha):
    m = len(q)
    k = 0
    for i in range(1, m + 1):
        if sorted(q)[i - 1] <= alpha * i / m:
            k = i
    if k == 0:
        return set()
    cut = sorted(q)[k - 1]
    return {j for j in range(m) if q[j] <= cut}


class TestBonferroni:
    def test_unit_weights_match_plain(self):
        p = np.array([1e-5, 4e-5, 5e-5, 6e-5, 0.5])
        assert weighted_bonferroni(p, np.ones(5), 0.00025) == bonferroni(p, 0.00025)
        assert bonferroni(p, 0.00025).indices == frozenset({0, 1, 2})

    def test_threshold_arithmetic(self):
        p = np.full(100, 0.9)
        p[0] = 0.004
        w = np.full(100, 90.0 / 99.0)
        w[0] = 10.0
        assert 0 in weighted_bonferroni(p, w, 0.05)

    def test_zero_weight_never_rejects(self):
        r = weighted_bonferroni(np.array([0.0, 0.5]), np.array([0.0, 2.0]), 0.05)
        assert 0 not in r

    def test_budget_contract(self):
        with pytest.raises(ContractError):
            weighted_bonferroni(np.array([0.01, 0.02]), np.array([1.0, 2.0]), 0.05)
        with pytest.raises(ContractError):
            weighted_bonferroni(np.array([0.01, 0.02]), np.ones(3), 0.05)

    def test_doubling_a_weight_enlarges(self):
        rng = np.random.default_rng(0)
        p = rng.random(50) * 0.01
        w = np.ones(50)
        base = weighted_bonferroni(p, w, 0.05)
        # doubling w_3 and lowering the rest keeps the budget; j=3 can only gain
        w2 = np.ones(50) * (50 - 2) / 49
        w2[3] = 2.0
        assert base.mask[3] <= weighted_bonferroni(p, w2, 0.05).mask[3]


class TestHolm:
    def test_classic_arithmetic(self):
        r = weighted_holm(np.array([0.02, 0.3]), np.ones(2), 0.05)
        assert r.indices == frozenset({0})

    @pytest.mark.parametrize("p,expected", [(0.05, True), (0.0500001, False)])
    def test_single(self, p, expected):
        assert (0 in weighted_holm(np.array([p]), np.ones(1), 0.05)) is expected

    def test_matches_brute_force(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            m = int(rng.integers(1, 9))
            p = rng.random(m) ** 3
            w = WeightVector.normalize(rng.random(m) * (rng.random(m) > 0.2) + 1e-3).weights
            got = weighted_holm(p, w, 0.2).indices
            assert got == brute_holm(p, w, 0.2)

    def test_zero_weight_excluded(self):
        r = weighted_holm(np.array([0.0, 0.001]), np.array([0.0, 2.0]), 0.05)
        assert r.indices == frozenset({1})


class TestBH:
    def test_step_up_arithmetic(self):
        assert bh(np.array([0.01, 0.02, 0.9]), 0.05).indices == frozenset({0, 1})

    def test_all_ones(self):
        assert len(bh(np.ones(5), 0.05)) == 0

    @pytest.mark.parametrize("p,expected", [(0.05, 1), (0.06, 0)])
    def test_single(self, p, expected):
        assert len(bh(np.array([p]), 0.05)) == expected

    def test_weighted_example(self):
        r = weighted_bh(np.array([0.04, 0.001]), np.array([2.0, 0.0]), 0.05)
        assert r.indices == frozenset({0})

    def test_matches_brute_force(self):
        rng = np.random.default_rng(5)
        for _ in range(300):
            m = int(rng.integers(1, 9))
            p = rng.random(m) ** 4
            w = WeightVector.normalize(rng.random(m) + 0.1).weights
            q = weighted_pvalues(p, w)
            assert weighted_bh(p, w, 0.1).indices == brute_bh(list(q), 0.1)


class TestExhaustive:
    """All p-value vectors on a grid, m <= 4, with several weight vectors."""

    WEIGHTS = {
        1: [np.ones(1)],
        2: [np.ones(2), np.array([1.5, 0.5]), np.array([2.0, 0.0])],
        3: [np.ones(3), np.array([2.0, 0.5, 0.5]), np.array([0.0, 1.5, 1.5])],
        4: [np.ones(4), np.array([2.5, 0.5, 0.5, 0.5]), np.array([0.0, 0.0, 2.0, 2.0])],
    }

    @pytest.mark.parametrize("m", [1, 2, 3, 4])
    def test_holm_contains_bonferroni_and_bh_identity(self, m):
        for p in itertools.product(P_GRID, repeat=m):
            p = np.array(p)
            assert weighted_bh(p, np.ones(m), 0.05) == bh(p, 0.05)
            for w in self.WEIGHTS[m]:
                assert weighted_holm(p, w, 0.05).issuperset(weighted_bonferroni(p, w, 0.05))


@settings(max_examples=200, deadline=None)
@given(
    p=st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=12),
    j=st.integers(0, 11),
    bump=st.floats(0, 1),
)
def test_raising_a_pvalue_never_enlarges(p, j, bump):
    p = np.array(p)
    m = p.size
    j %= m
    w = WeightVector.normalize(np.linspace(0.5, 1.5, m)).weights
    raised = p.copy()
    raised[j] = min(1.0, p[j] + bump)
    for proc in (weighted_bonferroni, weighted_holm, weighted_bh):
        assert proc(raised, w, 0.05).issubset(proc(p, w, 0.05))


@settings(max_examples=200, deadline=None)
@given(p=st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=12))
def test_adjusted_pvalues_reproduce_rejections(p):
    p = np.array(p)
    w = WeightVector.normalize(np.linspace(2.0, 0.5, p.size)).weights
    for method, proc in (("bonferroni", weighted_bonferroni), ("holm", weighted_holm), ("bh", weighted_bh)):
        adj = adjusted_pvalues(p, w, method)
        assert np.all((adj >= 0) & (adj <= 1))
        got = proc(p, w, 0.05).mask
        # equality except for floating ties exactly at the boundary
        assert np.all(got[adj < 0.05 * (1 - 1e-12)])
        assert not np.any(got[adj > 0.05 * (1 + 1e-12)])


def test_battery_input_accepted():
    b = TestBattery.from_pvalues([1e-6, 0.5])
    assert weighted_bonferroni(b, WeightVector.uniform(2), 0.05).indices == frozenset({0})


class TestBHAsymptotic:
    def test_residual_and_bounds(self):
        res = bh_asymptotic_threshold(4.0, 0.9, 0.05, 1000)
        assert res.found
        assert res.beta_coef == pytest.approx((1 / 0.05 - 0.9) / 0.1)
        assert res.residual <= 1e-12
        assert res.within_bounds
        assert 0.05 / 1000 <= res.u_star <= 0.05

    def test_u_star_decreases_in_A0(self):
        us = [bh_asymptotic_threshold(4.0, a0, 0.05, 1000).u_star for a0 in (0.5, 0.7, 0.9, 0.99)]
        assert all(b < a for a, b in zip(us, us[1:]))

    def test_root_is_a_fixed_point(self):
        res = bh_asymptotic_threshold(3.0, 0.8, 0.1, 100)
        h = distfn.upper_tail(distfn.upper_quantile(res.u_star) - 3.0)
        assert h == pytest.approx(res.beta_coef * res.u_star, rel=1e-10)

    def test_no_positive_root(self):
        # a very weak alternative: H(u) stays below beta u
        res = bh_asymptotic_threshold(0.01, 0.99, 0.05, 1000)
        assert not res.found and res.u_star == 0.0


def test_rejection_set_type():
    assert isinstance(bh(np.array([0.01]), 0.05), RejectionSet)
