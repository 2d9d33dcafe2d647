import math

import numpy as np
import pytest

from corrbound.anderson import (
    AndersonModel,
    Ensemble,
    build_hamiltonian,
    correlator,
    dle_fit,
    evolution_amplitudes,
    fermi_block,
    loc_as_rhs,
    mpdl_experiment,
    propagator_block,
    q_statistic,
    ule_det_check,
    ule_diagnostic,
)
from corrbound.bounds import kernel_matrix
from corrbound.geometry import PointConfig, SizeCapError, random_config
from corrbound.multilinear import abs_permanent, sym_eigendecomposition
from corrbound.rng import stream_rng

P = PointConfig
MODEL = AndersonModel(d=1, L=64, W=8.0, seed=7)
T_GRID = np.linspace(0.0, 50.0, 26)


@pytest.fixture(scope="module")
def ens():
    return Ensemble(MODEL, 60)


@pytest.fixture(scope="module")
def fit(ens):
    return dle_fit(MODEL, 60, ensemble=ens)


def test_hamiltonian_examples():
    H = build_hamiltonian(AndersonModel(1, 2, 0.0), 0)
    assert np.array_equal(H, [[0.0, -1.0], [-1.0, 0.0]])
    m = AndersonModel(2, 5, 3.0, seed=4)
    assert np.array_equal(build_hamiltonian(m, 3), build_hamiltonian(m, 3))
    assert not np.array_equal(build_hamiltonian(m, 3), build_hamiltonian(m, 4))
    H = build_hamiltonian(m, 1)
    assert np.array_equal(H, H.T)
    assert np.all(np.abs(np.diag(H)) <= 1.5)
    assert np.count_nonzero(H - np.diag(np.diag(H))) == 2 * 2 * 5 * 4


def test_size_cap():
    with pytest.raises(SizeCapError):
        AndersonModel(d=3, L=13)


def test_amplitudes_at_time_zero():
    H = build_hamiltonian(MODEL, 0)
    amp = evolution_amplitudes(H, [(3, 3), (3, 4), (10, 30)], [0.0, 1.0])
    assert amp.amplitudes[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert amp.amplitudes[0, 1] == pytest.approx(0.0, abs=1e-12)
    assert amp.amplitudes[0, 2] == pytest.approx(0.0, abs=1e-12)
    assert np.all(amp.amplitudes <= amp.correlator[None, :] + 1e-12)


def test_propagator_against_expm():
    from scipy.linalg import expm

    H = build_hamiltonian(AndersonModel(1, 12, 4.0, seed=1), 0)
    eig = sym_eigendecomposition(H)
    G = propagator_block(eig, range(12), range(12), [0.7])[0]
    assert np.allclose(G, expm(-0.7j * H), atol=1e-12)


def test_unitarity_and_domination(ens):
    sites = list(range(MODEL.n_sites))
    for s in range(0, 60, 6):
        G = propagator_block(ens.eig(s), sites, sites, T_GRID)
        assert np.abs((np.abs(G) ** 2).sum(axis=2) - 1).max() <= 1e-8
        assert np.all(np.abs(G).max(axis=0) <= correlator(ens.eig(s)) + 1e-12)


def test_jacobi_and_lapack_agree():
    H = build_hamiltonian(AndersonModel(1, 16, 8.0, seed=2), 0)
    w1, V1 = sym_eigendecomposition(H, "lapack")
    w2, V2 = sym_eigendecomposition(H, "jacobi")
    assert np.allclose(w1, w2, atol=1e-10)
    assert np.allclose(np.abs(V1) @ np.abs(V1).T, np.abs(V2) @ np.abs(V2).T, atol=1e-8)


def test_dle_free_is_not_localized():
    res = dle_fit(AndersonModel(1, 32, 0.0, seed=1), 30)
    assert not res.localized
    assert res.message


def test_dle_strong_disorder(fit):
    assert fit.localized and fit.mu > 0 and fit.ci[0] > 0
    off = MODEL.distances() > 0
    assert np.all(fit.mean_estimator[off] <= fit.C * np.exp(-fit.mu * MODEL.distances()[off]) * (1 + 1e-12))
    stronger = dle_fit(AndersonModel(1, 64, 16.0, seed=7), 30)
    assert stronger.mu > fit.mu


def test_mpdl_single_pair_is_two_point(ens, fit):
    X, Y = P([(20,)]), P([(26,)])
    rep = mpdl_experiment(MODEL, X, Y, 60, T_GRID, fit, ens)
    assert rep.rhs == pytest.approx(fit.C * math.exp(-fit.mu * 6))
    direct = np.mean([np.abs(propagator_block(ens.eig(s), [20], [26], T_GRID))[:, 0, 0]
                      for s in range(60)], axis=0).max()
    assert rep.lhs == pytest.approx(direct, rel=1e-12)
    assert rep.satisfied


def test_mpdl_identical_configs(ens, fit):
    X = P([(5,), (17,), (40,)])
    rep = mpdl_experiment(MODEL, X, X, 60, [0.0], fit, ens)
    assert rep.lhs == pytest.approx(1.0, abs=1e-12)
    assert math.isfinite(rep.rhs)
    assert rep.params["D_s"] == 0 and any("D_s = 0" in n for n in rep.notes)


def test_mpdl_random_draws(ens, fit):
    rng = stream_rng(7, 99)
    ok = 0
    for _ in range(30):
        n = int(rng.integers(1, 8))
        rep = mpdl_experiment(MODEL, random_config(rng, n, 1, 64), random_config(rng, n, 1, 64), 60,
                              T_GRID, fit, ens)
        ok += rep.satisfied
        assert "D_s_ge_N_over_8" in rep.params
    assert ok >= 29


def test_ule_diagonal_hamiltonian():
    H = np.diag(np.linspace(-1, 1, 10))
    coords = np.arange(10)[:, None]
    rep = ule_diagnostic(sym_eigendecomposition(H), coords)
    assert rep.holds and rep.C == pytest.approx(1.0) and rep.mu == pytest.approx(3.0)


def test_ule_free_fails_and_strong_holds():
    free = AndersonModel(1, 64, 0.0)
    assert not ule_diagnostic(sym_eigendecomposition(build_hamiltonian(free, 0)), free.coords()).holds
    strong = AndersonModel(1, 64, 10.0, seed=3)
    for s in range(5):
        rep = ule_diagnostic(sym_eigendecomposition(build_hamiltonian(strong, s)), strong.coords())
        assert rep.holds and rep.mu > 0 and rep.worst_residual <= 1e-12


def test_ule_det_check():
    strong = AndersonModel(1, 64, 10.0, seed=3)
    rng = stream_rng(3, 5)
    for s in range(5):
        eig = sym_eigendecomposition(build_hamiltonian(strong, s))
        rep = ule_diagnostic(eig, strong.coords())
        n = int(rng.integers(1, 6))
        X, Y = random_config(rng, n, 1, 64), random_config(rng, n, 1, 64)
        out = ule_det_check(eig, strong.coords(), rep, X, Y, T_GRID, [x[0] for x in X], [y[0] for y in Y])
        assert out.satisfied and out.theorem_id == "ule-det"


def test_q_single_site_box():
    m = AndersonModel(1, 1, 2.0)
    eig = sym_eigendecomposition(build_hamiltonian(m, 0))
    q = q_statistic(eig, m, 1.0, R=0.0, origin=(0,))
    assert q.Q == pytest.approx(1.0) and len(q.region) == 1


@pytest.mark.parametrize("family", ["evolution", "fermi"])
def test_q_pointwise_bound(ens, fit, family):
    for s in range(0, 60, 5):
        q = q_statistic(ens.eig(s), MODEL, fit.mu, R=64, family=family, energy=0.5)
        assert math.isfinite(q.Q) and q.holds and q.worst_ratio <= 1.0


def test_fermi_block_is_contraction(ens):
    F = fermi_block(ens.eig(0), range(64), range(64), [-1.0, 0.0, 2.0])
    for E in F:
        assert np.linalg.norm(E, 2) <= 1 + 1e-12
        assert np.allclose(E, E.T)


def test_q_stable_under_radius_doubling(ens, fit):
    means = {R: np.mean([q_statistic(ens.eig(s), MODEL, fit.mu, R).Q for s in range(60)])
             for R in (8, 16, 32)}
    assert means[8] < means[16] < means[32]
    assert means[32] - means[16] < means[16] - means[8]
    assert means[32] / means[16] < 1.25


def test_loc_as_chain(ens, fit):
    """Entry bound from Q, then the permanent bound, then the explicit RHS."""
    origin = np.array([MODEL.L // 2])
    rng = stream_rng(7, 123)
    for s in range(0, 60, 4):
        eig = ens.eig(s)
        q = q_statistic(eig, MODEL, fit.mu, R=64)
        n = int(rng.integers(1, 6))
        X, Y = random_config(rng, n, 1, 64), random_config(rng, n, 1, 64)
        rows, cols = [x[0] for x in X], [y[0] for y in Y]
        G = propagator_block(eig, rows, cols, T_GRID)
        w = np.array([(1 + abs(x[0] - origin[0])) ** 2 for x in X])
        entry_cap = q.Q * w[:, None] * kernel_matrix(X, Y, fit.mu / 2)
        assert np.all(np.abs(G) <= entry_cap[None] * (1 + 1e-12))
        det = np.abs(np.linalg.det(G)).max()
        mid = q.Q**n * np.prod(w) * abs_permanent(kernel_matrix(X, Y, fit.mu / 2))
        assert det <= mid * (1 + 1e-12)
        assert mid <= loc_as_rhs(X, Y, q.Q, fit.mu, origin) * (1 + 1e-12)
