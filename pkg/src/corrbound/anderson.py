"""Finite-box Anderson model: propagators, localization fits and diagnostics.

H = A + V on {0..L-1}^d with open boundaries, where A has -1 on nearest
neighbour pairs and V is i.i.d. uniform on [-W/2, W/2].  Every disorder
realization is indexed by a stream number, so sample s of seed S is the same
matrix no matter which routine asks for it.

Upper bounds on sup_t |<delta_x, e^{-itH} delta_y>| always use the
eigenfunction correlator sum_k |psi_k(x)| |psi_k(y)|; maxima over a finite
time grid are used only where a lower bound is wanted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import ExplicitConstants, thm13_rhs_explicit
from .cluster import DecayKernel, thm12_rhs_simple
from .geometry import ConfigError, PointConfig, SizeCapError
from .matching import CostMatrix, bottleneck_assignment, min_sum_assignment
from .multilinear import sym_eigendecomposition
from .reports import BoundReport
from .rng import stream_rng

MAX_SITES = 2000
MAX_MPDL_N = 10


@dataclass(frozen=True)
class AndersonModel:
    d: int = 1
    L: int = 64
    W: float = 8.0
    seed: int = 0

    def __post_init__(self):
        if self.d < 1 or self.L < 1:
            raise ValueError("need d >= 1 and L >= 1")
        if self.W < 0:
            raise ValueError("disorder amplitude must be nonnegative")
        if self.n_sites > MAX_SITES:
            raise SizeCapError(f"{self.n_sites} sites exceeds the cap {MAX_SITES}")

    @property
    def n_sites(self) -> int:
        return self.L**self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.L,) * self.d

    def coords(self) -> np.ndarray:
        return np.array(np.unravel_index(np.arange(self.n_sites), self.shape)).T

    def index(self, site) -> int:
        site = tuple(int(c) for c in site)
        if len(site) != self.d or any(not 0 <= c < self.L for c in site):
            raise ValueError(f"site {site} is outside the box")
        return int(np.ravel_multi_index(site, self.shape))

    def distances(self) -> np.ndarray:
        c = self.coords()
        return np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(axis=2))


def hopping_matrix(model: AndersonModel) -> np.ndarray:
    N = model.n_sites
    T = np.zeros((N, N))
    idx = np.arange(N).reshape(model.shape)
    for axis in range(model.d):
        a = np.take(idx, range(model.L - 1), axis=axis).ravel()
        b = np.take(idx, range(1, model.L), axis=axis).ravel()
        T[a, b] = T[b, a] = -1.0
    return T


def build_hamiltonian(model: AndersonModel, stream: int = 0) -> np.ndarray:
    rng = stream_rng(model.seed, stream)
    V = rng.uniform(-model.W / 2, model.W / 2, size=model.n_sites)
    return hopping_matrix(model) + np.diag(V)


class Ensemble:
    """Lazily computed eigendecompositions of disorder realizations 0..n-1."""

    def __init__(self, model: AndersonModel, n_samples: int):
        self.model = model
        self.n_samples = n_samples
        self._eig: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def eig(self, s: int):
        if s not in self._eig:
            self._eig[s] = sym_eigendecomposition(build_hamiltonian(self.model, s))
        return self._eig[s]

    def __iter__(self):
        return (self.eig(s) for s in range(self.n_samples))


def propagator_block(eig, rows, cols, t_grid) -> np.ndarray:
    """<delta_x, e^{-itH} delta_y> for x in rows, y in cols: shape (T, rows, cols)."""
    w, V = eig
    t = np.asarray(t_grid, dtype=float)
    phase = np.exp(-1j * np.outer(t, w))
    return np.einsum("ak,tk,bk->tab", V[rows], phase, V[cols], optimize=True)


def fermi_block(eig, rows, cols, energies, eps: float = 0.5) -> np.ndarray:
    """<delta_x, f_E(H) delta_y> with f_E(l) = 1 / (1 + exp((l - E)/eps)); shape (E, rows, cols)."""
    w, V = eig
    E = np.asarray(energies, dtype=float)
    f = 0.5 * (1 - np.tanh((w[None, :] - E[:, None]) / (2 * eps)))
    return np.einsum("ak,ek,bk->eab", V[rows], f, V[cols], optimize=True)


def correlator(eig) -> np.ndarray:
    """sum_k |psi_k(x)| |psi_k(y)| for all site pairs."""
    _, V = eig
    A = np.abs(V)
    return A @ A.T


@dataclass
class EvolutionAmplitudes:
    pairs: list
    t_grid: np.ndarray
    amplitudes: np.ndarray  # (T, pairs)
    correlator: np.ndarray  # (pairs,)


def evolution_amplitudes(H, pairs, t_grid, eig=None) -> EvolutionAmplitudes:
    if eig is None:
        eig = sym_eigendecomposition(H)
    w, V = eig
    x = [p[0] for p in pairs]
    y = [p[1] for p in pairs]
    t = np.asarray(t_grid, dtype=float)
    phase = np.exp(-1j * np.outer(t, w))
    amp = np.abs(np.einsum("pk,tk,pk->tp", V[x], phase, V[y], optimize=True))
    corr = (np.abs(V[x]) * np.abs(V[y])).sum(axis=1)
    return EvolutionAmplitudes(list(pairs), t, amp, corr)


@dataclass
class DLEFit:
    mu: float
    C: float
    ci: tuple[float, float]
    localized: bool
    distances: np.ndarray
    profile: np.ndarray
    residuals: np.ndarray
    mean_estimator: np.ndarray = field(repr=False)
    message: str = ""

    def kernel(self) -> DecayKernel:
        return DecayKernel(C=self.C, mu=self.mu)

    def rows(self):
        return [(float(r), float(p), float(e)) for r, p, e in
                zip(self.distances, self.profile, self.residuals)]


def _log_linear(r, y):
    A = np.vstack([np.ones_like(r), r]).T
    coef, *_ = np.linalg.lstsq(A, np.log(y), rcond=None)
    return coef[0], -coef[1]


def dle_fit(model: AndersonModel, n_samples: int = 200, r_max: float | None = None,
            floor: float = 1e-12, n_boot: int = 200, ensemble: Ensemble | None = None,
            boot_seed: int = 0) -> DLEFit:
    """Fit E[min(correlator, 1)] ~ C exp(-mu |x - y|) over all site pairs.

    mu comes from a least-squares fit of the log distance profile; C is then
    the smallest constant making C exp(-mu r) an envelope of every pair, so
    the fitted kernel bounds the estimator (itself an upper bound of sup_t)
    on the sampled ensemble.
    """
    if n_samples < 30:
        raise ValueError("DLE fit needs at least 30 samples")
    ens = ensemble or Ensemble(model, n_samples)
    dist = model.distances()
    r_all = np.round(dist, 9)
    radii = np.unique(r_all)
    radii = radii[radii > 0]
    if r_max is None:
        r_max = (model.L - 1) / 2
    radii = radii[radii <= r_max]
    if len(radii) < 2:
        raise ValueError("degenerate fit: fewer than two distinct distances")
    masks = [r_all == r for r in radii]
    per_sample = np.empty((n_samples, len(radii)))
    total = np.zeros_like(dist)
    for s in range(n_samples):
        est = np.minimum(correlator(ens.eig(s)), 1.0)
        total += est
        per_sample[s] = [est[m].mean() for m in masks]
    mean_est = total / n_samples
    profile = per_sample.mean(axis=0)
    use = profile > floor
    if use.sum() < 2:
        raise ValueError("degenerate fit: profile below floor")
    r, y = radii[use], profile[use]
    intercept, mu = _log_linear(r, y)
    residuals = np.log(y) - (intercept - mu * r)

    rng = stream_rng(boot_seed, 0xB007)
    boots = []
    for _ in range(n_boot):
        pick = rng.integers(n_samples, size=n_samples)
        yb = per_sample[pick].mean(axis=0)[use]
        boots.append(_log_linear(r, yb)[1])
    ci = (float(np.quantile(boots, 0.025)), float(np.quantile(boots, 0.975)))

    # drop in the fitted profile across the range must be at least a factor e
    localized = bool(mu > 0 and ci[0] > 0 and mu * (r[-1] - r[0]) >= 1.0)
    if localized:
        offdiag = dist > 0
        C = float(max(1.0, np.max(mean_est[offdiag] * np.exp(mu * dist[offdiag]))))
        message = ""
    else:
        C = math.inf
        message = "no exponential decay in the correlator profile"
    return DLEFit(mu=float(mu), C=C, ci=ci, localized=localized, distances=r, profile=y,
                  residuals=residuals, mean_estimator=mean_est, message=message)


def _site_indices(model: AndersonModel, X: PointConfig) -> list[int]:
    return [model.index(x) for x in X]


def mpdl_experiment(model: AndersonModel, X: PointConfig, Y: PointConfig, n_samples: int,
                    t_grid, fit: DLEFit, ensemble: Ensemble | None = None) -> BoundReport:
    """sup over the time grid of E|det| of the propagator block, against the bottleneck bound."""
    if len(X) != len(Y):
        raise ConfigError("configurations differ in size")
    if len(X) > MAX_MPDL_N:
        raise SizeCapError(f"n={len(X)} exceeds the cap {MAX_MPDL_N}")
    ens = ensemble or Ensemble(model, n_samples)
    rows, cols = _site_indices(model, X), _site_indices(model, Y)
    t_grid = np.asarray(t_grid, dtype=float)
    dets = np.zeros(len(t_grid))
    for s in range(n_samples):
        dets += np.abs(np.linalg.det(propagator_block(ens.eig(s), rows, cols, t_grid)))
    dets /= n_samples
    lhs = float(dets.max())
    notes = []
    if fit.localized:
        rhs = thm12_rhs_simple(X, Y, fit.kernel())
    else:
        rhs = math.inf
        notes.append("kernel not localized; bound is vacuous")
    ds = min_sum_assignment(CostMatrix.from_configs(X, Y)).value_sum
    dm = bottleneck_assignment(CostMatrix.from_configs(X, Y)).value_max
    if ds == 0:
        notes.append("D_s = 0: bound carries no decay")
    N = model.n_sites
    return BoundReport(
        theorem_id="mpdl",
        lhs=lhs,
        rhs=rhs,
        params={"n": len(X), "d": model.d, "L": model.L, "W": model.W,
                "C_hat": fit.C, "mu_hat": fit.mu, "D_s": ds, "D_m": dm,
                "N": N, "D_s_ge_N_over_8": bool(ds >= N / 8),
                "t_argmax": float(t_grid[int(dets.argmax())])},
        provenance={"seed": model.seed, "samples": n_samples, "t_points": len(t_grid)},
        notes=notes,
    )


@dataclass
class ULEReport:
    centers: np.ndarray
    mu_grid: np.ndarray
    C_grid: np.ndarray
    C: float
    mu: float
    holds: bool
    worst_residual: float


def ule_diagnostic(eig, coords: np.ndarray, mu_grid=None, c_max: float = 5.0,
                   mu_min: float = 0.1) -> ULEReport:
    """Uniform envelope |phi_k(m)| <= C exp(-mu |m - m_k|) with m_k = argmax |phi_k|.

    For each mu on the grid, C(mu) is the smallest constant that works for
    every eigenfunction; the envelope holds when some mu >= mu_min has
    C(mu) <= c_max, and the largest such mu is reported.
    """
    _, V = eig
    if mu_grid is None:
        mu_grid = np.round(np.arange(0.05, 3.0001, 0.05), 10)
    mu_grid = np.asarray(mu_grid, dtype=float)
    A = np.abs(V)
    centers = np.argmax(A, axis=0)
    coords = np.asarray(coords)
    dist = np.sqrt(((coords[:, None, :] - coords[None, centers, :]) ** 2).sum(axis=2))
    C_grid = np.array([float(np.max(A * np.exp(mu * dist))) for mu in mu_grid])
    ok = (C_grid <= c_max) & (mu_grid >= mu_min)
    if ok.any():
        i = int(np.flatnonzero(ok)[-1])
        holds = True
    else:
        i = int(np.argmin(C_grid * np.exp(-mu_grid)))
        holds = False
    C, mu = float(C_grid[i]), float(mu_grid[i])
    worst = float(np.max(A - C * np.exp(-mu * dist)))
    return ULEReport(centers, mu_grid, C_grid, C, mu, holds, worst)


def ule_two_point_constant(eig, coords, report: ULEReport, mu_prime: float) -> float:
    """C' with sup_t |<delta_x, e^{-itH} delta_y>| <= C' exp(-mu' |x - y|), from the envelope.

    |amplitude| <= sum_k |phi_k(x)| |phi_k(y)| <= C^2 sum_k exp(-mu(|x-m_k| + |y-m_k|)).
    """
    coords = np.asarray(coords)
    to_center = np.sqrt(((coords[:, None, :] - coords[None, report.centers, :]) ** 2).sum(axis=2))
    E = np.exp(-report.mu * to_center)
    S = E @ E.T
    D = np.sqrt(((coords[:, None, :] - coords[None, :, :]) ** 2).sum(axis=2))
    return float(report.C**2 * np.max(S * np.exp(mu_prime * D)))


def ule_det_check(eig, coords, report: ULEReport, X: PointConfig, Y: PointConfig,
                  t_grid, rows, cols) -> BoundReport:
    """|det| of the propagator block at each sampled time against the permanent bound."""
    mu_p = report.mu / 2
    Cp = ule_two_point_constant(eig, coords, report, mu_p)
    rhs = thm13_rhs_explicit(X, Y, Cp, ExplicitConstants.build(X.dim, mu_p))
    dets = np.abs(np.linalg.det(propagator_block(eig, rows, cols, t_grid)))
    return BoundReport("ule-det", float(dets.max()), rhs,
                       params={"C_env": report.C, "mu_env": report.mu, "C_two_point": Cp,
                               "mu_two_point": mu_p, "n": len(X)})


@dataclass
class QResult:
    Q: float
    holds: bool
    worst_ratio: float
    region: np.ndarray


def q_statistic(eig, model: AndersonModel, mu: float, R: float, origin=None,
                family: str = "evolution", energy: float = 0.0, eps: float = 0.5) -> QResult:
    """Truncated Q = sum_{|x|,|y| <= R} (1+|x|)^{-d-1} e^{mu|x-y|/2} s(x, y).

    s is min(correlator, 1) for the evolution family, |<delta_x, f(H) delta_y>|
    for the Fermi family.  Every summand is at most Q, i.e.
    s(x, y) <= Q (1+|x|)^{d+1} e^{-mu|x-y|/2}; ``holds`` records that check.
    """
    coords = model.coords()
    if origin is None:
        origin = np.full(model.d, model.L // 2)
    norm = np.sqrt(((coords - np.asarray(origin)) ** 2).sum(axis=1))
    region = np.flatnonzero(norm <= R)
    if family == "evolution":
        s = np.minimum(correlator(eig), 1.0)
    elif family == "fermi":
        s = np.abs(fermi_block(eig, np.arange(model.n_sites), np.arange(model.n_sites),
                              [energy], eps)[0])
    else:
        raise ValueError(f"unknown family {family!r}")
    s = s[np.ix_(region, region)]
    D = model.distances()[np.ix_(region, region)]
    weight = (1 + norm[region])[:, None] ** (-(model.d + 1))
    terms = weight * np.exp(mu * D / 2) * s
    Q = math.fsum(terms.ravel().tolist())
    return QResult(Q=Q, holds=bool(np.all(terms <= Q)),
                   worst_ratio=float(terms.max() / Q) if Q > 0 else 0.0, region=region)


def loc_as_rhs(X: PointConfig, Y: PointConfig, Q: float, mu: float, origin) -> float:
    """prod_j Q (1+|x_j|)^{d+1} times the explicit permanent bound at rate mu/2."""
    d = X.dim
    origin = np.asarray(origin)
    log_pref = sum(math.log(Q) + (d + 1) * math.log1p(float(np.linalg.norm(np.asarray(x) - origin)))
                   for x in X)
    return math.exp(log_pref) * thm13_rhs_explicit(X, Y, 1.0, ExplicitConstants.build(d, mu / 2))
