import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corrbound.geometry import SUP, PointConfig, brute_dm, brute_ds, brute_ds_pairing, random_config
from corrbound.matching import (
    CostMatrix,
    bottleneck_assignment,
    evaluate,
    min_sum_assignment,
    min_weight_perfect_matching,
    minimal_permutation,
    select_j0,
)
from conftest import config_pairs

P = PointConfig


def test_min_sum_examples():
    a = min_sum_assignment(CostMatrix.from_array([[1, 3], [3, 1]]))
    assert a.perm == (0, 1) and a.value_sum == 2
    c = CostMatrix.from_array(np.full((4, 4), 2.5))
    assert min_sum_assignment(c).value_sum == 10.0


def test_bottleneck_examples():
    X, Y = P([(0, 0), (2, 0)]), P([(1, 0), (3, 0)])
    assert bottleneck_assignment(CostMatrix.from_configs(X, Y)).value_max == 1.0
    one = CostMatrix.from_configs(P([(0, 0)]), P([(3, 4)]))
    assert bottleneck_assignment(one).value_max == 5.0


def test_minimal_permutation_example():
    X, Y = P([(0,), (5,)]), P([(1,), (100,)])
    c = CostMatrix.from_configs(X, Y)
    a = minimal_permutation(c)
    assert a.perm == (0, 1)
    assert a.value_max == 95.0 and a.max_multiplicity == 1
    assert select_j0(a, c) == 1  # the second pair, 0-based


def test_select_j0_tie_break():
    # bottleneck value 5 attained by rows 1 and 4 under the identity
    cost = np.ones((6, 6)) * 9
    for j in range(6):
        cost[j, j] = 1
    cost[1, 1] = cost[4, 4] = 5
    c = CostMatrix.from_array(cost)
    a = evaluate(tuple(range(6)), c)
    assert a.max_multiplicity == 2
    assert select_j0(a, c) == 1


def test_pairing_examples():
    assert min_weight_perfect_matching(P([(0, 0), (3, 4)]))[1] == 5.0
    pairs, v = min_weight_perfect_matching(P([(0,), (1,), (10,), (11,)]))
    assert v == 2.0 and sorted(pairs) == [(0, 1), (2, 3)]


@pytest.mark.parametrize("metric", ["euclidean", "sup"])
def test_oracles_up_to_9(metric):
    for X, Y in config_pairs(201, 10, 9, n_min=7):
        c = CostMatrix.from_configs(X, Y, metric)
        assert bottleneck_assignment(c).value_max == brute_dm(X, Y, metric)
        bf = brute_ds(X, Y, metric)
        assert abs(min_sum_assignment(c).value_sum - bf) <= 1e-9 * max(1, bf)


def test_min_sum_below_every_permutation():
    for X, Y in config_pairs(202, 30, 6):
        c = CostMatrix.from_configs(X, Y)
        best = min_sum_assignment(c).value_sum
        for p in itertools.permutations(range(len(X))):
            assert best <= evaluate(p, c).value_sum + 1e-9


def test_minimal_multiplicity_quantifier():
    for X, Y in config_pairs(203, 60, 7, box=4):
        c = CostMatrix.from_configs(X, Y)
        a = minimal_permutation(c)
        assert a.key_max == bottleneck_assignment(c).key_max
        for p in itertools.permutations(range(len(X))):
            e = evaluate(p, c)
            if e.key_max == a.key_max:
                assert a.max_multiplicity <= e.max_multiplicity


def test_surrogate_multiplicity_matches_count():
    for X, Y in config_pairs(204, 50, 8, box=4):
        c = CostMatrix.from_configs(X, Y)
        a = minimal_permutation(c)
        assert a.max_multiplicity == sum(c.key[j, a.perm[j]] == a.key_max for j in range(c.n))


def test_pairing_oracle_up_to_12():
    rng = np.random.default_rng(7)
    for m in (2, 4, 6, 8, 10, 12):
        for _ in range(3):
            Z = random_config(rng, m, 2, 6)
            got = min_weight_perfect_matching(Z)[1]
            assert abs(got - brute_ds_pairing(Z)) <= 1e-9
            assert min_weight_perfect_matching(Z, SUP)[1] == brute_ds_pairing(Z, SUP)


def test_exact_on_integer_costs():
    rng = np.random.default_rng(3)
    for _ in range(20):
        A = rng.integers(0, 5, size=(6, 6))
        want = min(sum(A[j, p[j]] for j in range(6)) for p in itertools.permutations(range(6)))
        assert min_sum_assignment(CostMatrix.from_array(A)).value_sum == want


def test_non_square_rejected():
    with pytest.raises(ValueError):
        min_sum_assignment(CostMatrix.from_configs(P([(0,)]), P([(1,), (2,)])))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), min_size=2, max_size=8,
                unique=True).filter(lambda v: len(v) % 2 == 0),
       st.randoms(use_true_random=False))
def test_pairing_relabel_invariance(pts, rnd):
    shuffled = list(pts)
    rnd.shuffle(shuffled)
    a = min_weight_perfect_matching(P(pts))[1]
    b = min_weight_perfect_matching(P(shuffled))[1]
    assert math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-12)
