"""Explicit permanent and pairing-sum bounds under a sum-distance decay.

The right-hand sides are assembled from the counting argument with every
constant written out:

* |M_l| <= (2de)^n ((2l+n)/n)^{dn} counts permutations whose sup-metric
  distance sum equals l;
* B is the threshold past which (3x)^d <= exp(mu x / 2);
* the sum over l >= D~ is split at l = B n, the head bounded with
  (2B+1)^{dn} and a geometric tail with ratio exp(-mu), the rest with a
  geometric tail of ratio exp(-mu/2).

Here D~ is the optimal assignment cost under the sup metric, an integer.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .geometry import (
    EUCLIDEAN,
    SUP,
    ConfigError,
    PointConfig,
    SizeCapError,
    distance_matrix,
    key_matrix,
)
from .matching import CostMatrix, min_sum_assignment, min_weight_perfect_matching
from .multilinear import abs_permanent, pairing_sum
from .reports import BoundReport

MAX_ML_ENUM = 8


def compute_B(d: int, mu: float, tol: float = 1e-12) -> float:
    """Smallest B >= 1 with (3x)^d <= exp(mu x / 2) for every x >= B.

    g(x) = mu x / 2 - d log(3x) is convex with minimum at x* = 2d/mu, so
    the condition fails only between its two roots; B is the larger root
    (or 1). Bisection keeps the upper end, where g >= 0.
    """
    if d < 1 or not mu > 0:
        raise ValueError("need d >= 1 and mu > 0")

    def g(x):
        return mu * x / 2 - d * math.log(3 * x)

    lo = max(1.0, 2 * d / mu)
    if g(lo) >= 0:
        return 1.0
    hi = 2 * lo
    while g(hi) < 0:
        hi *= 2
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if g(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class ExplicitConstants:
    d: int
    mu: float
    B: float
    Cd: float
    geo1: float
    geo2: float

    @classmethod
    def build(cls, d: int, mu: float) -> "ExplicitConstants":
        return cls(
            d=d,
            mu=mu,
            B=compute_B(d, mu),
            Cd=2 * d * math.e,
            geo1=1.0 / (1.0 - math.exp(-mu)),
            geo2=1.0 / (1.0 - math.exp(-mu / 2)),
        )

    def check(self, grid: int = 2000) -> bool:
        """(3x)^d <= exp(mu x / 2) on a grid above B, at B, and at the convex minimum."""
        xs = self.B * np.concatenate([[1.0], np.linspace(1.0, 50.0, grid)])
        xs = np.append(xs, max(self.B, 2 * self.d / self.mu))
        lhs = self.d * np.log(3 * xs)
        return bool(self.B >= 1 and np.all(lhs <= self.mu * xs / 2 + 1e-12))

    def to_dict(self) -> dict:
        return {"d": self.d, "mu": self.mu, "B": self.B, "Cd": self.Cd,
                "geo1": self.geo1, "geo2": self.geo2}


def sl_cardinality(ell: int, n: int) -> int:
    """Number of n-tuples of nonnegative integers summing to ell."""
    if ell < 0 or n < 1:
        raise ValueError("need ell >= 0 and n >= 1")
    return math.comb(ell + n - 1, n - 1)


def stirling_envelope(ell: int, n: int, C: float = 1.0) -> float:
    return C / math.sqrt(n) * math.e**n * ((ell + n) / n) ** n


def minimal_stirling_constant(ell_max: int, n_max: int) -> float:
    """Smallest C making |S_l| <= (C / sqrt n) e^n ((l+n)/n)^n on the tested range."""
    return max(
        sl_cardinality(ell, n) / stirling_envelope(ell, n)
        for n in range(1, n_max + 1)
        for ell in range(ell_max + 1)
    )


def counting_bound(ell: int, n: int, d: int) -> float:
    return (2 * d * math.e) ** n * ((2 * ell + n) / n) ** (d * n)


def ml_counts(X: PointConfig, Y: PointConfig) -> Counter:
    """Map l -> number of permutations whose sup-distance sum equals l."""
    if len(X) != len(Y):
        raise ConfigError("configurations differ in size")
    n = len(X)
    if n > MAX_ML_ENUM:
        raise SizeCapError(f"n={n} exceeds the enumeration cap {MAX_ML_ENUM}")
    k = key_matrix(X, Y, SUP).tolist()
    return Counter(sum(k[j][p[j]] for j in range(n)) for p in itertools.permutations(range(n)))


def enumerate_Ml(X: PointConfig, Y: PointConfig, ell: int) -> int:
    return ml_counts(X, Y).get(ell, 0)


def sup_sum_distance(X: PointConfig, Y: PointConfig) -> int:
    """Optimal assignment cost under the sup metric (exact integer)."""
    a = min_sum_assignment(CostMatrix.from_configs(X, Y, SUP))
    return int(round(a.value_sum))


def log_sum_bracket(lower: float, n: int, consts: ExplicitConstants) -> float:
    """log of a bound on sum_{l >= D~} |M_l| exp(-mu l), given D~ >= ``lower``.

    The bracket is decreasing in D~, so any lower bound may be substituted.
    """
    mu, d, B = consts.mu, consts.d, consts.B
    log_cd = n * math.log(consts.Cd)
    tail = -mu * lower / 2 + math.log(consts.geo2)
    if lower >= B * n:
        return log_cd + tail
    head = d * n * math.log(2 * B + 1) - mu * lower + math.log(consts.geo1)
    return log_cd + np.logaddexp(head, tail)


def thm13_rhs_explicit(X: PointConfig, Y: PointConfig, C_entry: float,
                       consts: ExplicitConstants) -> float:
    """Upper bound on sum_pi prod_j |m_{j pi(j)}| when |m_jk| <= C exp(-mu |x_j - y_k|)."""
    if len(X) != len(Y):
        raise ConfigError("configurations differ in size")
    n = len(X)
    if n == 0:
        return 1.0
    Dt = sup_sum_distance(X, Y)
    return math.exp(n * math.log(C_entry) + log_sum_bracket(Dt, n, consts))


def thm15_rhs_explicit(X: PointConfig, C_entry: float, consts: ExplicitConstants) -> float:
    """Upper bound on the pairing sum when |m_jk| <= C exp(-mu |x_j - x_k|).

    The pairing sum splits over the binom(2n, n) choices of first elements;
    each part is a permutation sum between X \\ Y_B and Y_B whose sup-metric
    assignment cost is at least D_s(X) / sqrt(d).
    """
    m = len(X)
    if m % 2:
        raise ConfigError("pairing bound needs an even number of points")
    n = m // 2
    if n == 0:
        return 1.0
    _, ds = min_weight_perfect_matching(X, EUCLIDEAN)
    lower = ds / math.sqrt(consts.d)
    log_rhs = (n * math.log(C_entry) + math.log(math.comb(2 * n, n))
               + log_sum_bracket(lower, n, consts))
    return math.exp(log_rhs)


def kernel_matrix(X: PointConfig, Y: PointConfig, mu: float, C: float = 1.0) -> np.ndarray:
    return C * np.exp(-mu * distance_matrix(X, Y))


def check_thm13(X: PointConfig, Y: PointConfig, mu: float, C_entry: float = 1.0,
                M=None) -> BoundReport:
    """Permanent of |M| (default: the decay kernel itself) against the explicit bound."""
    consts = ExplicitConstants.build(X.dim, mu)
    if M is None:
        M = kernel_matrix(X, Y, mu, C_entry)
    lhs = abs_permanent(M)
    rhs = thm13_rhs_explicit(X, Y, C_entry, consts)
    return BoundReport(
        theorem_id="thm13",
        lhs=lhs,
        rhs=rhs,
        params={"n": len(X), "d": X.dim, "mu": mu, "C": C_entry,
                "D_s": min_sum_assignment(CostMatrix.from_configs(X, Y)).value_sum,
                "D_s_sup": sup_sum_distance(X, Y), **{"constants": consts.to_dict()}},
    )


def check_thm15(X: PointConfig, mu: float, C_entry: float = 1.0, M=None) -> BoundReport:
    consts = ExplicitConstants.build(X.dim, mu)
    if M is None:
        M = kernel_matrix(X, X, mu, C_entry)
    lhs = pairing_sum(M)
    rhs = thm15_rhs_explicit(X, C_entry, consts)
    return BoundReport(
        theorem_id="thm15",
        lhs=lhs,
        rhs=rhs,
        params={"2n": len(X), "d": X.dim, "mu": mu, "C": C_entry,
                "D_s_pairing": min_weight_perfect_matching(X)[1],
                "constants": consts.to_dict()},
    )


def counting_table(X: PointConfig, Y: PointConfig) -> list[tuple[int, int, float]]:
    """Rows (l, |M_l|, counting bound) for every realized l."""
    n, d = len(X), X.dim
    return [(ell, cnt, counting_bound(ell, n, d)) for ell, cnt in sorted(ml_counts(X, Y).items())]
