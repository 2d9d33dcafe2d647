"""Nearest-neighbour ferromagnetic Ising model at zero field on open boxes.

The Gibbs weight of a configuration is exp(beta * sum_{<x,y>} sigma_x sigma_y),
one term per nearest-neighbour edge.  Exact expectations enumerate all 2^N
states; Metropolis (checkerboard) and Wolff samplers cover larger boxes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .bounds import ExplicitConstants, thm15_rhs_explicit
from .geometry import PointConfig, SizeCapError
from .matching import min_weight_perfect_matching
from .multilinear import hafnian, pfaffian, skew_from_upper
from .reports import BoundReport
from .rng import stream_rng

MAX_EXACT_SITES = 20
MAX_G2N = 10

# inverse critical temperatures for the nearest-neighbour model
BETA_C = {1: math.inf, 2: math.asinh(1.0) / 2, 3: 0.2216546}


def critical_beta(d: int) -> float:
    if d not in BETA_C:
        raise ValueError(f"no critical point tabulated for d={d}")
    return BETA_C[d]


@dataclass(frozen=True)
class CorrelationEstimate:
    sites: tuple
    mean: float
    stderr: float
    method: str


@dataclass(frozen=True)
class DecayFit:
    mu: float
    C: float
    ok: bool
    message: str = ""


@dataclass(eq=False)
class IsingLattice:
    dims: tuple[int, ...]
    beta: float
    h: float = 0.0
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.dims = tuple(int(L) for L in self.dims)
        if not self.dims or any(L < 1 for L in self.dims):
            raise ValueError("lattice needs positive side lengths")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.h != 0.0:
            raise ValueError("only zero field is supported")

    @property
    def d(self) -> int:
        return len(self.dims)

    @property
    def n_sites(self) -> int:
        return math.prod(self.dims)

    @cached_property
    def coords(self) -> list[tuple[int, ...]]:
        return [tuple(int(c) for c in np.unravel_index(i, self.dims)) for i in range(self.n_sites)]

    def index(self, site) -> int:
        site = tuple(int(c) for c in site)
        if len(site) != self.d or any(not 0 <= c < L for c, L in zip(site, self.dims)):
            raise ValueError(f"site {site} is outside the lattice {self.dims}")
        return int(np.ravel_multi_index(site, self.dims))

    @cached_property
    def edges(self) -> list[tuple[int, int]]:
        out = []
        for i, x in enumerate(self.coords):
            for axis in range(self.d):
                if x[axis] + 1 < self.dims[axis]:
                    y = list(x)
                    y[axis] += 1
                    out.append((i, self.index(y)))
        return out

    @cached_property
    def neighbours(self) -> list[list[int]]:
        nb = [[] for _ in range(self.n_sites)]
        for a, b in self.edges:
            nb[a].append(b)
            nb[b].append(a)
        return nb

    # exact enumeration

    def _exact_tables(self):
        if "exact" not in self._cache:
            N = self.n_sites
            if N > MAX_EXACT_SITES:
                raise SizeCapError(f"{N} sites exceeds the enumeration cap {MAX_EXACT_SITES}")
            idx = np.arange(1 << N, dtype=np.int64)
            spins = (1 - 2 * ((idx[:, None] >> np.arange(N)) & 1)).astype(np.int8)
            bond_sum = np.zeros(1 << N, dtype=np.int64)
            for a, b in self.edges:
                bond_sum += spins[:, a].astype(np.int64) * spins[:, b]
            # shift by the ground-state energy to keep weights in range
            w = np.exp(self.beta * (bond_sum - len(self.edges)))
            self._cache["exact"] = (spins, w / w.sum())
        return self._cache["exact"]

    def exact_expectation(self, idx: Sequence[int]) -> float:
        spins, p = self._exact_tables()
        if len(idx) == 0:
            return 1.0
        prod = np.prod(spins[:, list(idx)].astype(np.int64), axis=1)
        return float(np.dot(p, prod))

    @cached_property
    def two_point_matrix(self) -> np.ndarray:
        """Exact <sigma_x sigma_y> for every pair of sites."""
        spins, p = self._exact_tables()
        S = spins.astype(float)
        return (S * p[:, None]).T @ S

    @cached_property
    def magnetizations(self) -> np.ndarray:
        spins, p = self._exact_tables()
        return p @ spins.astype(float)


def _indices(lat: IsingLattice, sites) -> list[int]:
    return [lat.index(s) for s in sites]


def exact_corr(lat: IsingLattice, A) -> CorrelationEstimate:
    """Exact <prod_{x in A} sigma_x> by full enumeration."""
    return CorrelationEstimate(tuple(map(tuple, A)), lat.exact_expectation(_indices(lat, A)),
                               0.0, "exact")


def truncated_two_point(lat: IsingLattice, x, y) -> float:
    i, j = lat.index(x), lat.index(y)
    m = lat.magnetizations
    return float(lat.two_point_matrix[i, j] - m[i] * m[j])


# Monte Carlo

def _metropolis_sweep(spins: np.ndarray, beta: float, colors, rng) -> None:
    for mask in colors:
        padded = np.pad(spins, 1)
        field_ = np.zeros(spins.shape)
        for axis in range(spins.ndim):
            sl_lo = [slice(1, -1)] * spins.ndim
            sl_hi = [slice(1, -1)] * spins.ndim
            sl_lo[axis] = slice(0, -2)
            sl_hi[axis] = slice(2, None)
            field_ += padded[tuple(sl_lo)] + padded[tuple(sl_hi)]
        dE = 2.0 * spins * field_
        accept = (rng.random(spins.shape) < np.exp(-beta * dE)) & mask
        spins[accept] *= -1


def _wolff_update(flat: np.ndarray, neighbours, p_add: float, rng) -> None:
    seed = int(rng.integers(flat.size))
    s = flat[seed]
    cluster = {seed}
    stack = [seed]
    while stack:
        a = stack.pop()
        for b in neighbours[a]:
            if b not in cluster and flat[b] == s and rng.random() < p_add:
                cluster.add(b)
                stack.append(b)
    flat[list(cluster)] *= -1


def sample_observables(lat: IsingLattice, observables, sweeps: int, burn_in: int,
                       method: str = "metropolis", seed: int = 0, stream: int = 0) -> np.ndarray:
    """Run one chain and return an array (sweeps, len(observables)).

    Each observable is a list of site indices; its value is the spin product.
    """
    if method not in ("metropolis", "wolff"):
        raise ValueError(f"unknown method {method!r}")
    if sweeps < burn_in:
        raise ValueError("sweeps must be at least burn_in")
    rng = stream_rng(seed, stream)
    spins = rng.choice(np.array([-1, 1], dtype=np.int64), size=lat.dims)
    parity = np.indices(lat.dims).sum(axis=0) % 2
    colors = (parity == 0, parity == 1)
    p_add = 1.0 - math.exp(-2.0 * lat.beta)
    obs = [np.array(o, dtype=np.int64) for o in observables]
    out = np.empty((sweeps, len(obs)))
    for step in range(burn_in + sweeps):
        if method == "metropolis":
            _metropolis_sweep(spins, lat.beta, colors, rng)
        else:
            flat = spins.reshape(-1)
            _wolff_update(flat, lat.neighbours, p_add, rng)
        if step >= burn_in:
            flat = spins.reshape(-1)
            out[step - burn_in] = [np.prod(flat[o]) if o.size else 1.0 for o in obs]
    return out


def batch_means(series: np.ndarray, batches: int = 20) -> tuple[float, float]:
    series = np.asarray(series, dtype=float)
    usable = len(series) - len(series) % batches
    means = series[:usable].reshape(batches, -1).mean(axis=1)
    return float(series.mean()), float(means.std(ddof=1) / math.sqrt(batches))


def mc_corr(lat: IsingLattice, A, sweeps: int = 20000, burn_in: int = 1000,
            method: str = "metropolis", seed: int = 0) -> CorrelationEstimate:
    series = sample_observables(lat, [_indices(lat, A)], sweeps, burn_in, method, seed)[:, 0]
    mean, err = batch_means(series)
    return CorrelationEstimate(tuple(map(tuple, A)), mean, err, method)


def binder_cumulant(lat: IsingLattice, sweeps: int, burn_in: int, seed: int = 0) -> float:
    """1 - <m^4> / (3 <m^2>^2) from a Wolff chain."""
    rng = stream_rng(seed, 0)
    spins = rng.choice(np.array([-1, 1], dtype=np.int64), size=lat.n_sites)
    p_add = 1.0 - math.exp(-2.0 * lat.beta)
    m2 = m4 = 0.0
    for step in range(burn_in + sweeps):
        _wolff_update(spins, lat.neighbours, p_add, rng)
        if step >= burn_in:
            m = spins.mean()
            m2 += m * m
            m4 += m**4
    m2 /= sweeps
    m4 /= sweeps
    return 1.0 - m4 / (3.0 * m2 * m2)


# decay fit and multi-point objects

def fit_decay(lat: IsingLattice, pairs=None) -> DecayFit:
    """Largest mu with <sigma_x sigma_y> <= exp(-mu |x - y|) on the given pairs (C = 1)."""
    if pairs is None:
        pairs = list(itertools.combinations(lat.coords, 2))
    rates = []
    for x, y in pairs:
        r = math.dist(x, y)
        if r == 0:
            continue
        g = lat.two_point_matrix[lat.index(x), lat.index(y)]
        if g >= 1.0:
            return DecayFit(0.0, 1.0, False, f"no decay between {x} and {y}")
        rates.append(math.inf if g <= 0 else -math.log(g) / r)
    if not rates:
        raise ValueError("decay fit needs at least one pair of distinct sites")
    mu = min(rates)
    return DecayFit(mu, 1.0, True, "" if math.isfinite(mu) else "all correlations vanish")


def u4(lat: IsingLattice, x1, x2, x3, x4) -> float:
    i = _indices(lat, (x1, x2, x3, x4))
    G = lat.two_point_matrix
    four = lat.exact_expectation(i)
    return float(four - (G[i[0], i[1]] * G[i[2], i[3]] + G[i[0], i[2]] * G[i[1], i[3]]
                         + G[i[0], i[3]] * G[i[1], i[2]]))


def u4_tree_bound(lat: IsingLattice, x1, x2, x3, x4) -> float:
    """2 sum_y prod_i <sigma_{x_i} sigma_y> over all sites y of the box."""
    G = lat.two_point_matrix
    rows = G[_indices(lat, (x1, x2, x3, x4))]
    return float(2.0 * np.prod(rows, axis=0).sum())


def g2n(lat: IsingLattice, X) -> float:
    """Pairing sum of exact two-point functions (the Gaussian prediction)."""
    if len(X) % 2:
        raise ValueError("G_2n needs an even number of sites")
    if len(X) > MAX_G2N:
        raise SizeCapError(f"2n={len(X)} exceeds cap {MAX_G2N}")
    idx = _indices(lat, X)
    return hafnian(lat.two_point_matrix[np.ix_(idx, idx)])


def g2n_enumerated(lat: IsingLattice, X) -> float:
    """1/2^n sum over pi with pi(1) < pi(3) < ... of two-point products; for testing."""
    idx = _indices(lat, X)
    G = lat.two_point_matrix
    m = len(idx)
    n = m // 2
    total = 0.0
    for p in itertools.permutations(range(m)):
        if all(p[2 * j] < p[2 * j + 2] for j in range(n - 1)):
            total += math.prod(G[idx[p[2 * j]], idx[p[2 * j + 1]]] for j in range(n))
    return total / 2**n


def gaussian_error_bound(lat: IsingLattice, X) -> tuple[float, float]:
    """(|<sigma_X> - G_2n(X)|, sum over 4-subsets of |U_4| G_{2n-4}(rest))."""
    if len(X) % 2 or len(X) > 8:
        raise ValueError("error estimate implemented for even 2n <= 8")
    X = [tuple(x) for x in X]
    gap = abs(lat.exact_expectation(_indices(lat, X)) - g2n(lat, X))
    rhs = 0.0
    for quad in itertools.combinations(range(len(X)), 4):
        rest = [X[i] for i in range(len(X)) if i not in quad]
        rhs += abs(u4(lat, *(X[i] for i in quad))) * g2n(lat, rest)
    return gap, rhs


def verify_thm22(lat: IsingLattice, A, fit: DecayFit | None = None) -> BoundReport:
    """<sigma_A> against the explicit pairing bound with the fitted two-point envelope."""
    A = [tuple(a) for a in A]
    beta_c = critical_beta(lat.d) if lat.d in BETA_C else math.nan
    notes = []
    if not lat.beta < beta_c:
        notes.append(f"beta={lat.beta} is not below beta_c={beta_c}")
    lhs = lat.exact_expectation(_indices(lat, A))
    params = {"dims": list(lat.dims), "beta": lat.beta, "sites": [list(a) for a in A]}
    if len(A) % 2:
        notes.append("odd |A|: vanishes by spin-flip symmetry")
        return BoundReport("thm22", lhs, 0.0, params, notes=notes)
    if fit is None:
        fit = fit_decay(lat)
    params.update({"mu_hat": fit.mu, "C_hat": fit.C})
    if not fit.ok:
        notes.append(fit.message)
        return BoundReport("thm22", lhs, math.inf, params, notes=notes)
    if not math.isfinite(fit.mu):
        notes.append(fit.message)
        return BoundReport("thm22", lhs, 0.0, params, notes=notes)
    X = PointConfig(A)
    params["D_s"] = min_weight_perfect_matching(X)[1]
    rhs = thm15_rhs_explicit(X, fit.C, ExplicitConstants.build(lat.d, fit.mu))
    notes.append("RHS uses the explicit pairing constant, not the literal one")
    return BoundReport("thm22", lhs, rhs, params, notes=notes)


def boundary_cycle(lat: IsingLattice) -> list[tuple[int, int]]:
    """Sites of the outer face of a 2D box, in cyclic (clockwise) order."""
    if lat.d != 2 or min(lat.dims) < 2:
        raise ValueError("boundary cycle needs a 2D box with both sides >= 2")
    R, Cn = lat.dims
    top = [(0, j) for j in range(Cn)]
    right = [(i, Cn - 1) for i in range(1, R)]
    bottom = [(R - 1, j) for j in range(Cn - 2, -1, -1)]
    left = [(i, 0) for i in range(R - 2, 0, -1)]
    return top + right + bottom + left


def is_cyclically_ordered(positions: Sequence[int]) -> bool:
    m = len(positions)
    if m <= 2:
        return True
    up = sum(positions[i] > positions[(i + 1) % m] for i in range(m))
    down = sum(positions[i] < positions[(i + 1) % m] for i in range(m))
    return up == 1 or down == 1


def boundary_pfaffian_check(lat: IsingLattice, X) -> dict:
    """Compare <prod sigma_{x_j}> with Pf[<sigma_{x_j} sigma_{x_k}>] for boundary sites."""
    X = [tuple(int(c) for c in x) for x in X]
    if len(X) % 2:
        raise ValueError("need an even number of boundary sites")
    cycle = boundary_cycle(lat)
    pos = {s: i for i, s in enumerate(cycle)}
    missing = [x for x in X if x not in pos]
    if missing:
        raise ValueError(f"sites {missing} are not on the outer face boundary")
    if len(set(X)) != len(X):
        raise ValueError("boundary sites must be distinct")
    idx = _indices(lat, X)
    lhs = lat.exact_expectation(idx)
    pf = pfaffian(skew_from_upper(lat.two_point_matrix[np.ix_(idx, idx)]))
    return {
        "lhs": lhs,
        "pfaffian": pf,
        "gap": abs(lhs - pf),
        "cyclic": is_cyclically_ordered([pos[x] for x in X]),
    }
