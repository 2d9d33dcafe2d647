import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corrbound.geometry import (
    SUP,
    ConfigError,
    PointConfig,
    SizeCapError,
    brute_dm,
    brute_ds,
    brute_ds_pairing,
    dist,
    dist_key,
    hausdorff_distance,
    key_matrix,
    perfect_pairings,
    random_config,
)
from conftest import config_pairs

P = PointConfig


def test_dist_examples():
    assert dist((0, 0), (3, 4)) == 5.0
    assert dist((0, 0), (3, 4), SUP) == 4.0
    assert dist((2, -1), (2, -1)) == 0.0
    assert dist((2, -1), (2, -1), SUP) == 0.0
    assert dist_key((0, 0), (3, 4)) == 25


def test_hausdorff_examples():
    X = P([(0,), (4,)])
    assert hausdorff_distance(X, X) == 0.0
    assert hausdorff_distance(P([(0,)]), P([(5,)])) == 5.0
    assert hausdorff_distance(P([(0,), (2,)]), P([(1,), (3,)])) == 1.0


def test_brute_identity_any_order():
    X = P([(0, 0), (1, 3), (4, 2)])
    Y = P([(4, 2), (0, 0), (1, 3)])
    assert brute_dm(X, Y) == 0.0
    assert brute_ds(X, Y) == 0.0


def test_pairing_examples():
    assert brute_ds_pairing(P([(0,), (1,)])) == 1.0
    assert brute_ds_pairing(P([(0,), (1,), (10,), (11,)])) == 2.0
    assert brute_ds_pairing(P([(0, 0), (0, 1), (5, 0), (5, 1)])) == 2.0


def test_perfect_pairings_count():
    for m in (2, 4, 6, 8):
        assert sum(1 for _ in perfect_pairings(range(m))) == math.prod(range(1, m, 2))


def test_validation():
    with pytest.raises(ConfigError):
        P([(0, 0), (0, 0)])
    with pytest.raises(ConfigError):
        P([(0, 0), (1,)])
    with pytest.raises(ConfigError):
        P([(0.5, 1)])
    with pytest.raises(ConfigError):
        brute_ds_pairing(P([(0,), (1,), (2,)]))
    with pytest.raises(SizeCapError):
        brute_dm(P([(i,) for i in range(10)]), P([(i,) for i in range(10, 20)]))


def test_json_roundtrip(tmp_path):
    X = P([(0, 1), (-3, 2)])
    assert P.from_json(X.to_json()) == X
    f = tmp_path / "x.json"
    f.write_text(json.dumps([[0, 1], [-3, 2]]), encoding="utf-8")
    assert P.load(f) == X


def test_distance_chain():
    # D_H <= D_m <= D_s <= n D_m
    for X, Y in config_pairs(101, 200, 6):
        dh, dm, ds = hausdorff_distance(X, Y), brute_dm(X, Y), brute_ds(X, Y)
        assert dh <= dm + 1e-12
        assert dm <= ds + 1e-12
        assert ds <= len(X) * dm + 1e-9


def test_pairing_equals_min_over_balanced_splits():
    import itertools

    for X, _ in config_pairs(102, 60, 4):
        Z = P(list(X) + [tuple(c + 97 for c in p) for p in X])  # 2n points, distinct
        idx = range(len(Z))
        best = min(
            brute_ds(Z.subset([i for i in idx if i not in B]), Z.subset(B))
            for B in itertools.combinations(idx, len(Z) // 2)
        )
        assert abs(brute_ds_pairing(Z) - best) <= 1e-9


def test_sup_vs_euclidean_sum():
    from corrbound.matching import CostMatrix, min_sum_assignment

    for X, Y in config_pairs(103, 100, 6):
        dt = min_sum_assignment(CostMatrix.from_configs(X, Y, SUP)).value_sum
        ds = min_sum_assignment(CostMatrix.from_configs(X, Y)).value_sum
        assert dt == int(dt)
        assert dt <= ds + 1e-9
        assert ds <= math.sqrt(X.dim) * dt + 1e-9


def test_key_matrix_is_integer():
    rng = np.random.default_rng(0)
    X, Y = random_config(rng, 5, 3, 7), random_config(rng, 5, 3, 7)
    K = key_matrix(X, Y)
    assert K.dtype.kind == "i"
    assert np.array_equal(np.sqrt(K), np.sqrt(K.astype(float)))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(-20, 20), st.integers(-20, 20)), min_size=1, max_size=6,
                unique=True),
       st.tuples(st.integers(-9, 9), st.integers(-9, 9)))
def test_translation_invariance(pts, shift):
    X = P(pts)
    Y = P(pts[::-1])
    Xs, Ys = X.translate(shift), Y.translate(shift)
    assert hausdorff_distance(X, Y) == hausdorff_distance(Xs, Ys)
    assert brute_dm(X, Y) == brute_dm(Xs, Ys)
