"""Exact assignment and matching solvers for the configuration distances.

Every solver works on a :class:`CostMatrix`, which carries the real costs
together with an exact integer key per entry (squared distance for the
Euclidean metric).  Sums are optimized over the real costs; every "equal to
the bottleneck" or "strictly below the bottleneck" decision is made on the
keys so that ties are detected without floating-point equality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import (
    EUCLIDEAN,
    ConfigError,
    PointConfig,
    SizeCapError,
    distance_matrix,
    key_matrix,
)

MAX_PAIRING_DP = 22


@dataclass(frozen=True)
class CostMatrix:
    cost: np.ndarray
    key: np.ndarray

    @classmethod
    def from_configs(cls, X: PointConfig, Y: PointConfig, metric: str = EUCLIDEAN) -> "CostMatrix":
        if len(X) != len(Y):
            raise ConfigError(f"configurations differ in size: {len(X)} vs {len(Y)}")
        return cls(distance_matrix(X, Y, metric), key_matrix(X, Y, metric))

    @classmethod
    def from_array(cls, a) -> "CostMatrix":
        a = np.asarray(a)
        if a.ndim != 2:
            raise ValueError("cost matrix must be two-dimensional")
        if not np.all(np.isfinite(a)) or np.any(a < 0):
            raise ValueError("costs must be finite and nonnegative")
        return cls(a.astype(float), a)

    @property
    def n(self) -> int:
        return self.cost.shape[0]

    def check_square(self) -> None:
        if self.cost.ndim != 2 or self.cost.shape[0] != self.cost.shape[1]:
            raise ValueError(f"cost matrix must be square, got shape {self.cost.shape}")


@dataclass(frozen=True)
class Assignment:
    perm: tuple[int, ...]
    value_sum: float
    value_max: float
    max_multiplicity: int
    key_max: object = None

    def to_dict(self) -> dict:
        return {
            "perm": list(self.perm),
            "sum": self.value_sum,
            "max": self.value_max,
            "multiplicity": self.max_multiplicity,
        }


def evaluate(perm, c: CostMatrix) -> Assignment:
    """Profile (sum, max, multiplicity of the max) of a given permutation."""
    perm = tuple(int(p) for p in perm)
    n = len(perm)
    if n == 0:
        return Assignment((), 0.0, 0.0, 0, 0)
    keys = [c.key[j, perm[j]] for j in range(n)]
    kmax = max(keys)
    j = keys.index(kmax)
    return Assignment(
        perm=perm,
        value_sum=math.fsum(float(c.cost[j, perm[j]]) for j in range(n)),
        value_max=float(c.cost[j, perm[j]]),
        max_multiplicity=sum(1 for k in keys if k == kmax),
        key_max=kmax.item() if hasattr(kmax, "item") else kmax,
    )


def _hungarian(a: list[list]) -> list[int]:
    """Shortest augmenting path Hungarian method, O(n^3).

    ``a`` is a square list-of-lists; returns ``perm`` with row j -> column perm[j].
    Works with exact ints as well as floats.
    """
    n = len(a)
    inf = float("inf")
    u = [0] * (n + 1)
    v = [0] * (n + 1)
    owner = [0] * (n + 1)  # column -> row, 1-based, 0 = free
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = owner[j0]
            delta = inf
            j1 = 0
            row = a[i0 - 1]
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[owner[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1
    perm = [0] * n
    for j in range(1, n + 1):
        perm[owner[j] - 1] = j - 1
    return perm


def _perfect_matching(allowed: np.ndarray) -> list[int] | None:
    """Kuhn's augmenting-path bipartite matching; None if no perfect matching."""
    n = allowed.shape[0]
    adj = [np.flatnonzero(allowed[j]).tolist() for j in range(n)]
    match_col = [-1] * n

    def augment(j, seen):
        for k in adj[j]:
            if seen[k]:
                continue
            seen[k] = True
            if match_col[k] < 0 or augment(match_col[k], seen):
                match_col[k] = j
                return True
        return False

    for j in range(n):
        if not augment(j, [False] * n):
            return None
    perm = [0] * n
    for k, j in enumerate(match_col):
        perm[j] = k
    return perm


def min_sum_assignment(c: CostMatrix) -> Assignment:
    c.check_square()
    if c.n == 0:
        return evaluate((), c)
    if np.issubdtype(c.key.dtype, np.integer) and np.array_equal(c.key, c.cost):
        table = c.key.tolist()  # exact integer arithmetic
    else:
        table = c.cost.tolist()
    return evaluate(_hungarian(table), c)


def bottleneck_assignment(c: CostMatrix) -> Assignment:
    """Minimize the largest cost by binary search over the distinct key values."""
    c.check_square()
    if c.n == 0:
        return evaluate((), c)
    levels = np.unique(c.key)
    lo, hi = 0, len(levels) - 1
    best = _perfect_matching(c.key <= levels[hi])
    while lo < hi:
        mid = (lo + hi) // 2
        perm = _perfect_matching(c.key <= levels[mid])
        if perm is None:
            lo = mid + 1
        else:
            hi, best = mid, perm
    if best is None:
        raise RuntimeError("bottleneck search failed")
    # best always holds the matching found at levels[hi]
    return evaluate(best, c)


def minimal_permutation(c: CostMatrix) -> Assignment:
    """A bottleneck-optimal assignment attaining the bottleneck value the fewest times.

    Among assignments using only entries with key <= D, the number of entries
    equal to D is the total cost under the surrogate weights 0 (< D), 1 (= D);
    entries above D are forbidden.
    """
    bn = bottleneck_assignment(c)
    n = c.n
    if n == 0:
        return bn
    D = bn.key_max
    forbidden = n + 1
    surrogate = np.where(c.key < D, 0, np.where(c.key == D, 1, forbidden)).astype(np.int64)
    perm = _hungarian(surrogate.tolist())
    total = int(sum(surrogate[j, perm[j]] for j in range(n)))
    if total >= forbidden:
        raise RuntimeError("surrogate assignment infeasible; bottleneck value is not D_m")
    a = evaluate(perm, c)
    if a.key_max != D or a.max_multiplicity != total:
        raise RuntimeError("surrogate optimum inconsistent with its multiplicity")
    return a


def select_j0(a: Assignment, c: CostMatrix) -> int:
    """Smallest row index whose assigned cost equals the bottleneck value."""
    for j, k in enumerate(a.perm):
        if c.key[j, k] == a.key_max:
            return j
    raise ValueError("assignment has no entry attaining its maximum")


def min_weight_perfect_matching(X: PointConfig, metric: str = EUCLIDEAN):
    """Minimum total length perfect pairing of X by subset dynamic programming.

    The lowest unpaired index is always paired first, so each pairing is
    reached along exactly one path. Returns ``(pairs, value)``.
    """
    m = len(X)
    if m % 2:
        raise ConfigError("perfect matching needs an even number of points")
    if m > MAX_PAIRING_DP:
        raise SizeCapError(f"2n={m} exceeds the matching cap {MAX_PAIRING_DP}")
    if m == 0:
        return [], 0.0
    w = distance_matrix(X, X, metric).tolist()
    full = (1 << m) - 1

    @lru_cache(maxsize=None)
    def best(mask: int):
        if mask == full:
            return 0.0, None
        i = 0
        while mask >> i & 1:
            i += 1
        out = (math.inf, None)
        for j in range(i + 1, m):
            if mask >> j & 1:
                continue
            val = w[i][j] + best(mask | 1 << i | 1 << j)[0]
            if val < out[0]:
                out = (val, j)
        return out

    pairs = []
    mask = 0
    while mask != full:
        i = 0
        while mask >> i & 1:
            i += 1
        j = best(mask)[1]
        pairs.append((i, j))
        mask |= 1 << i | 1 << j
    value = math.fsum(w[a][b] for a, b in pairs)
    best.cache_clear()
    return pairs, value
