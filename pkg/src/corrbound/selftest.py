"""Oracle and invariant suites, runnable from the CLI and from pytest.

Each suite returns a :class:`SuiteResult`; a suite passes iff it recorded no
failures.  Suites draw every random quantity from streams of the master
seed, so the serialized results are a pure function of (level, seed).
Wall time is kept out of the serialized form for that reason.
"""

from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import anderson, bounds, cluster, geometry, ising, matching, multilinear
from .geometry import EUCLIDEAN, SUP, PointConfig, random_config
from .matching import CostMatrix
from .rng import stream_rng

EUCLID_SUM_TOL = 1e-9


@dataclass
class SuiteResult:
    name: str
    cases: int = 0
    failures: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.failures

    def check(self, ok: bool, **info) -> None:
        self.cases += 1
        if not ok:
            self.failures.append(info)

    def to_dict(self) -> dict:
        return {"suite": self.name, "cases": self.cases, "passed": self.passed,
                "failures": self.failures[:20], "n_failures": len(self.failures),
                "details": self.details}


def _pair(rng, n, d, box=None):
    box = box or (max(5, 2 * n + 2) if d == 1 else 5)
    while box**d < 2 * n:
        box += 1
    return random_config(rng, n, d, box), random_config(rng, n, d, box)


def _cfg(X):
    return [list(p) for p in X]


_PERMS: dict[int, np.ndarray] = {}


def _all_perms(n):
    if n not in _PERMS:
        _PERMS[n] = np.array(list(itertools.permutations(range(n))), dtype=np.int64).reshape(-1, n)
    return _PERMS[n]


def _gather(K, perms):
    return K[np.arange(K.shape[0])[None, :], perms]


# criterion 1

def suite_distance_oracles(seed: int, trials: int = 500) -> SuiteResult:
    res = SuiteResult("distance-oracles")
    for t in range(trials):
        rng = stream_rng(seed, t)
        n = int(rng.integers(1, 9))
        d = int(rng.integers(1, 4))
        X, Y = _pair(rng, n, d)
        # bottleneck: exact comparison of the sqrt of identical integers
        c = CostMatrix.from_configs(X, Y)
        bn = matching.bottleneck_assignment(c)
        res.check(bn.value_max == geometry.brute_dm(X, Y), case="D_m", X=_cfg(X), Y=_cfg(Y))
        ms = matching.min_sum_assignment(c).value_sum
        bf = geometry.brute_ds(X, Y)
        res.check(abs(ms - bf) <= EUCLID_SUM_TOL * max(1.0, bf), case="D_s", got=ms, want=bf,
                  X=_cfg(X), Y=_cfg(Y))
        s_sup = matching.min_sum_assignment(CostMatrix.from_configs(X, Y, SUP)).value_sum
        res.check(s_sup == geometry.brute_ds(X, Y, SUP), case="D_s sup", X=_cfg(X), Y=_cfg(Y))
        m_sup = matching.bottleneck_assignment(CostMatrix.from_configs(X, Y, SUP)).value_max
        res.check(m_sup == geometry.brute_dm(X, Y, SUP), case="D_m sup", X=_cfg(X), Y=_cfg(Y))
        # pairing distance within one configuration, 2n <= 10
        Z = random_config(rng, 2 * int(rng.integers(1, 6)), d, 6 if d > 1 else 14)
        got = matching.min_weight_perfect_matching(Z)[1]
        want = geometry.brute_ds_pairing(Z)
        res.check(abs(got - want) <= EUCLID_SUM_TOL * max(1.0, want), case="D_s(X)", got=got,
                  want=want, X=_cfg(Z))
        got_sup = matching.min_weight_perfect_matching(Z, SUP)[1]
        res.check(got_sup == geometry.brute_ds_pairing(Z, SUP), case="D_s(X) sup", X=_cfg(Z))
    return res


# criterion 2

def suite_minimal_permutation(seed: int, trials: int = 200) -> SuiteResult:
    res = SuiteResult("minimal-permutation")
    for t in range(trials):
        rng = stream_rng(seed, 10_000 + t)
        n = int(rng.integers(1, 9))
        X, Y = _pair(rng, n, int(rng.integers(1, 4)), box=4)
        c = CostMatrix.from_configs(X, Y)
        a = matching.minimal_permutation(c)
        vals = _gather(c.key, _all_perms(n))
        mx = vals.max(axis=1)
        best = mx.min()
        mult = (vals[mx == best] == best).sum(axis=1).min()
        res.check((a.key_max, a.max_multiplicity) == (int(best), int(mult)),
                  got=[a.key_max, a.max_multiplicity], want=[int(best), int(mult)],
                  X=_cfg(X), Y=_cfg(Y))
    return res


# criterion 3

def suite_cluster_separation(seed: int, trials: int = 200) -> SuiteResult:
    res = SuiteResult("cluster-separation")
    sizes = []
    for t in range(trials):
        rng = stream_rng(seed, 20_000 + t)
        n = int(rng.integers(1, 9))
        X, Y = _pair(rng, n, int(rng.integers(1, 4)), box=5)
        try:
            cp = cluster.cluster_for(X, Y)
        except cluster.NotMinimalError as exc:
            res.check(False, error=str(exc), X=_cfg(X), Y=_cfg(Y))
            continue
        problems = cluster.check_separation(cp, X, Y)
        res.check(not problems, problems=problems, X=_cfg(X), Y=_cfg(Y))
        sizes.append(len(cp.members))
    res.details["mean_cluster_size"] = float(np.mean(sizes)) if sizes else 0.0
    return res


# criterion 4

def _random_contraction(rng, p):
    M = rng.normal(size=(p, p)) + 1j * rng.normal(size=(p, p))
    if rng.random() < 0.3:
        # low-rank top block makes the bound tight-ish
        M[:, : p // 2] = M[:, :1] * rng.normal(size=(1, p // 2))
    return M / multilinear.spectral_norm(M) * rng.uniform(0.5, 1.0)


def suite_bordered_det(seed: int, trials: int = 500) -> SuiteResult:
    res = SuiteResult("bordered-determinant")
    worst = 0.0
    for t in range(trials):
        rng = stream_rng(seed, 30_000 + t)
        p = int(rng.integers(2, 9))
        M = _random_contraction(rng, p)
        ell = int(rng.integers(1, p + 1))
        m = int(rng.integers(0, ell))
        bound = cluster.bordered_det_bound(M, (ell, m))
        det = abs(multilinear.determinant(M))
        worst = max(worst, det / bound if bound > 0 else float(det > 0))
        res.check(det <= bound + 1e-9, det=det, bound=bound, p=p, shape=[ell, m])
    res.details["max_det_over_bound"] = worst
    return res


# criterion 5

def suite_thm12_deterministic(seed: int, trials: int = 200) -> SuiteResult:
    res = SuiteResult("thm12-deterministic")
    for t in range(trials):
        rng = stream_rng(seed, 40_000 + t)
        n = int(rng.integers(1, 9))
        d = int(rng.integers(1, 4))
        mu = float(rng.choice([0.5, 1.0, 2.0]))
        X, Y = _pair(rng, n, d, box=6)
        M = cluster.decay_kernel_matrix(rng, X, Y, mu)
        cp = cluster.cluster_for(X, Y)
        kernel = cluster.DecayKernel(C=1.0, mu=mu)
        det = abs(multilinear.determinant(M))
        arranged, shape = cp.arrange(M)
        block = cluster.bordered_det_bound(arranged, shape)
        rc = cluster.thm12_rhs_cluster(cp, X, Y, kernel)
        rs = cluster.thm12_rhs_simple(X, Y, kernel)
        slack = 1 + 1e-12
        res.check(det <= block * slack + 1e-15 and block <= rc * slack and rc <= rs * slack,
                  det=det, block=block, rhs_cluster=rc, rhs_simple=rs, X=_cfg(X), Y=_cfg(Y))
    return res


# criterion 6

def suite_thm13(seed: int, per_cell: int = 200) -> SuiteResult:
    res = SuiteResult("thm13-explicit")
    worst = 0.0
    cell = 0
    for n in range(1, 8):
        for d in (1, 2, 3):
            for mu in (0.5, 1.0, 2.0):
                consts = bounds.ExplicitConstants.build(d, mu)
                res.check(consts.check(), case="B threshold", d=d, mu=mu)
                for t in range(per_cell):
                    rng = stream_rng(seed, 50_000 + 1000 * cell + t)
                    X, Y = _pair(rng, n, d, box=6 if d > 1 else 3 * n + 3)
                    lhs = multilinear.abs_permanent(bounds.kernel_matrix(X, Y, mu))
                    rhs = bounds.thm13_rhs_explicit(X, Y, 1.0, consts)
                    worst = max(worst, lhs / rhs)
                    res.check(lhs <= rhs, lhs=lhs, rhs=rhs, mu=mu, X=_cfg(X), Y=_cfg(Y))
                cell += 1
    res.details["max_lhs_over_rhs"] = worst
    return res


# criterion 7

def suite_counting(seed: int, trials: int = 100) -> SuiteResult:
    res = SuiteResult("counting-bound")
    worst = 0.0
    for t in range(trials):
        rng = stream_rng(seed, 60_000 + t)
        n = int(rng.integers(1, 7))
        d = int(rng.integers(1, 4))
        X, Y = _pair(rng, n, d, box=5)
        counts = bounds.ml_counts(X, Y)
        res.check(sum(counts.values()) == math.factorial(n), case="partition of S_n")
        dt = bounds.sup_sum_distance(X, Y)
        res.check(min(counts) == dt, case="smallest l is the sup assignment cost")
        for ell, cnt in counts.items():
            b = bounds.counting_bound(ell, n, d)
            worst = max(worst, cnt / b)
            res.check(cnt <= b, ell=ell, count=cnt, bound=b, X=_cfg(X), Y=_cfg(Y))
    res.details["max_count_over_bound"] = worst
    res.details["stirling_constant"] = bounds.minimal_stirling_constant(60, 12)
    return res


# criterion 8

def suite_thm15(seed: int, trials: int = 100) -> SuiteResult:
    res = SuiteResult("thm15-pfaffian")
    worst = 0.0
    for t in range(trials):
        rng = stream_rng(seed, 70_000 + t)
        n = int(rng.integers(1, 6))
        d = int(rng.integers(1, 4))
        mu = float(rng.choice([0.5, 1.0, 2.0]))
        X = random_config(rng, 2 * n, d, 6 if d > 1 else 6 * n)
        rep = bounds.check_thm15(X, mu)
        worst = max(worst, rep.lhs / rep.rhs)
        res.check(rep.satisfied, lhs=rep.lhs, rhs=rep.rhs, X=_cfg(X), mu=mu)
    for t in range(trials):
        rng = stream_rng(seed, 71_000 + t)
        m = 2 * int(rng.integers(1, 7))
        A = rng.normal(size=(m, m))
        S = A - A.T
        pf = multilinear.pfaffian(S)
        det = multilinear.determinant(S)
        res.check(abs(pf * pf - det) <= 1e-8 * max(abs(det), 1e-300), case="Pf^2 = det",
                  pf2=pf * pf, det=det)
    res.details["max_lhs_over_rhs"] = worst
    return res


# criterion 9

def suite_ising_exact(seed: int) -> SuiteResult:
    res = SuiteResult("ising-exact")
    lat = ising.IsingLattice((4, 4), 0.3)
    sites = lat.coords
    rng = stream_rng(seed, 80_000)
    worst_odd = 0.0
    for k in (1, 3, 5):
        for _ in range(10):
            A = [sites[i] for i in rng.choice(len(sites), size=k, replace=False)]
            v = abs(ising.exact_corr(lat, A).mean)
            worst_odd = max(worst_odd, v)
            res.check(v <= 1e-14, case="odd |A| vanishes", A=A, value=v)
    chain = ising.IsingLattice((2,), 0.3)
    v = ising.exact_corr(chain, [(0,), (1,)]).mean
    res.check(abs(v - math.tanh(0.3)) <= 1e-12, case="2-chain", got=v, want=math.tanh(0.3))
    for _ in range(30):
        quad = [sites[i] for i in rng.choice(len(sites), size=4, replace=False)]
        u = abs(ising.u4(lat, *quad))
        tb = ising.u4_tree_bound(lat, *quad)
        res.check(u <= tb, case="U4 tree bound", quad=quad, u4=u, tree=tb)
    corners = [(0, 0), (0, 3), (3, 3), (3, 0)]
    for rot in range(4):
        cyc = corners[rot:] + corners[:rot]
        for order in (cyc, cyc[::-1]):
            out = ising.boundary_pfaffian_check(lat, order)
            res.check(out["cyclic"] and out["gap"] <= 1e-10, case="GBK identity", order=order,
                      gap=out["gap"])
    scrambled = ising.boundary_pfaffian_check(lat, [(0, 0), (3, 3), (0, 3), (3, 0)])
    res.check(not scrambled["cyclic"] and scrambled["gap"] > 1e-6, case="GBK negative control",
              gap=scrambled["gap"])
    boundary = ising.boundary_cycle(lat)
    fit = ising.fit_decay(lat)
    res.details["mu_hat"] = fit.mu
    for _ in range(10):
        A = [sites[i] for i in rng.choice(len(sites), size=4, replace=False)]
        rep = ising.verify_thm22(lat, A, fit)
        res.check(rep.satisfied, case="bulk multi-point bound", A=A, lhs=rep.lhs, rhs=rep.rhs)
        pos = sorted(rng.choice(len(boundary), size=4, replace=False))
        B = [boundary[i] for i in pos]
        rep = ising.verify_thm22(lat, B, fit)
        res.check(rep.satisfied, case="boundary multi-point bound", A=B)
    res.details["max_odd_correlation"] = worst_odd
    res.details["scrambled_gap"] = scrambled["gap"]
    return res


# criterion 10

def suite_anderson(seed: int, samples: int = 200, draws: int = 100) -> SuiteResult:
    res = SuiteResult("anderson")
    model = anderson.AndersonModel(d=1, L=64, W=8.0, seed=seed)
    ens = anderson.Ensemble(model, samples)
    t_grid = np.linspace(0.0, 50.0, 26)
    worst_unit = 0.0
    all_sites = list(range(model.n_sites))
    for s in range(samples):
        eig = ens.eig(s)
        G = anderson.propagator_block(eig, all_sites, all_sites, t_grid)
        unit = np.abs((np.abs(G) ** 2).sum(axis=2) - 1.0).max()
        worst_unit = max(worst_unit, float(unit))
        corr = anderson.correlator(eig)
        dominated = bool(np.all(np.abs(G).max(axis=0) <= corr + 1e-12))
        res.check(unit <= 1e-8 and dominated, case="unitarity/correlator", sample=s)
    fit = anderson.dle_fit(model, samples, ensemble=ens)
    res.check(fit.localized and fit.ci[0] > 0, case="DLE fit", mu=fit.mu, ci=list(fit.ci))
    res.details.update({"mu_hat": fit.mu, "C_hat": fit.C, "mu_ci": list(fit.ci),
                        "max_unitarity_error": worst_unit})
    rng = stream_rng(seed, 90_000)
    satisfied = 0
    for _ in range(draws):
        n = int(rng.integers(1, 11))
        X = random_config(rng, n, 1, model.L)
        Y = random_config(rng, n, 1, model.L)
        rep = anderson.mpdl_experiment(model, X, Y, samples, t_grid, fit, ensemble=ens)
        satisfied += rep.satisfied
    res.details["mpdl_satisfied"] = satisfied
    res.check(satisfied >= 0.95 * draws, case="MPDL rate", satisfied=satisfied, draws=draws)
    for s in range(samples):
        q = anderson.q_statistic(ens.eig(s), model, fit.mu, R=model.L)
        res.check(q.holds and math.isfinite(q.Q), case="Q pointwise bound", sample=s, Q=q.Q)
    return res


# quick analytic suite

def suite_quick(seed: int) -> SuiteResult:
    res = SuiteResult("quick")
    P = PointConfig
    res.check(geometry.dist((0, 0), (3, 4)) == 5.0, case="3-4-5")
    res.check(geometry.dist((0, 0), (3, 4), SUP) == 4.0, case="sup")
    res.check(geometry.hausdorff_distance(P([(0,), (2,)]), P([(1,), (3,)])) == 1.0, case="D_H")
    X, Y = P([(0, 0), (2, 0)]), P([(1, 0), (3, 0)])
    res.check(geometry.brute_dm(X, Y) == 1.0 and geometry.brute_ds(X, Y) == 2.0, case="D_m, D_s")
    res.check(geometry.brute_ds_pairing(P([(0,), (1,), (10,), (11,)])) == 2.0, case="pairing")
    X, Y = P([(0,), (5,)]), P([(1,), (100,)])
    c = CostMatrix.from_configs(X, Y)
    a = matching.minimal_permutation(c)
    res.check(a.perm == (0, 1) and a.value_max == 95.0 and a.max_multiplicity == 1,
              case="minimal permutation")
    res.check(matching.select_j0(a, c) == 1, case="j0")
    cp = cluster.build_cluster(X, Y, a, 1)
    res.check(cp.members == [0], case="cluster")
    res.check(multilinear.abs_permanent(np.ones((2, 2))) == 2.0, case="permanent")
    res.check(multilinear.pairing_sum(np.ones((4, 4))) == 12.0, case="pairing sum")
    res.check(multilinear.pfaffian([[0, 3.0], [-3.0, 0]]) == 3.0, case="pfaffian")
    res.check(multilinear.determinant(np.diag([2.0, 3.0])) == 6.0, case="det")
    res.check(bounds.sl_cardinality(2, 2) == 3 and bounds.sl_cardinality(5, 3) == 21, case="S_l")
    lat = ising.IsingLattice((2,), 0.7)
    res.check(abs(ising.exact_corr(lat, [(0,), (1,)]).mean - math.tanh(0.7)) < 1e-12,
              case="tanh")
    H = anderson.build_hamiltonian(anderson.AndersonModel(1, 2, 0.0), 0)
    res.check(np.array_equal(H, [[0.0, -1.0], [-1.0, 0.0]]), case="free hamiltonian")
    return res


QUICK = {"quick": suite_quick}
FULL = {
    "A1-distance-oracles": suite_distance_oracles,
    "A2-minimal-permutation": suite_minimal_permutation,
    "A3-cluster-separation": suite_cluster_separation,
    "A4-bordered-determinant": suite_bordered_det,
    "A5-thm12-deterministic": suite_thm12_deterministic,
    "A6-thm13-explicit": suite_thm13,
    "A7-counting-bound": suite_counting,
    "A8-thm15-pfaffian": suite_thm15,
    "A9-ising-exact": suite_ising_exact,
    "A10-anderson": suite_anderson,
}


def run_suite(name: str, seed: int) -> SuiteResult:
    fn = {**QUICK, **FULL}[name]
    start = time.perf_counter()
    res = fn(seed)
    res.name = name
    res.wall_time = time.perf_counter() - start
    return res


def selftest(level: str = "quick", seed: int = 0, jobs: int = 1,
             names: list[str] | None = None) -> list[SuiteResult]:
    """Run the suites of a level (or the named ones) in a fixed order.

    With ``jobs > 1`` suites run in worker processes; results are collected
    in suite order, and each suite seeds itself, so output is unchanged.
    """
    if level not in ("quick", "full"):
        raise ValueError("level must be 'quick' or 'full'")
    if names is None:
        names = list(QUICK) + (list(FULL) if level == "full" else [])
    if jobs <= 1 or len(names) == 1:
        return [run_suite(name, seed) for name in names]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_suite, names, [seed] * len(names)))
