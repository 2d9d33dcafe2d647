"""Lattice points, configurations, metrics and brute-force distance oracles."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

EUCLIDEAN = "euclidean"
SUP = "sup"
METRICS = (EUCLIDEAN, SUP)

# enumeration caps for the brute-force oracles
MAX_ORACLE_N = 9
MAX_ORACLE_PAIRING = 12


class ConfigError(ValueError):
    """Invalid point configuration (duplicates, mixed dimensions, bad size)."""


class SizeCapError(ValueError):
    """Input is larger than an exhaustive routine is allowed to handle."""


def _check_metric(metric: str) -> None:
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


@dataclass(frozen=True)
class PointConfig:
    """An ordered list of distinct points of Z^d."""

    points: tuple[tuple[int, ...], ...]

    def __init__(self, points: Iterable[Sequence[int]]):
        pts = []
        for p in points:
            q = tuple(int(c) for c in p)
            if any(int(c) != c for c in p):
                raise ConfigError(f"non-integer coordinate in {p!r}")
            pts.append(q)
        if pts:
            d = len(pts[0])
            if d < 1:
                raise ConfigError("points need at least one coordinate")
            if any(len(p) != d for p in pts):
                raise ConfigError("all points must have the same dimension")
        if len(set(pts)) != len(pts):
            raise ConfigError("configuration contains repeated points")
        object.__setattr__(self, "points", tuple(pts))

    @property
    def dim(self) -> int:
        return len(self.points[0]) if self.points else 0

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]

    def array(self) -> np.ndarray:
        return np.array(self.points, dtype=np.int64).reshape(len(self.points), self.dim)

    def subset(self, idx: Iterable[int]) -> "PointConfig":
        return PointConfig(self.points[i] for i in idx)

    def translate(self, shift: Sequence[int]) -> "PointConfig":
        return PointConfig(tuple(a + b for a, b in zip(p, shift)) for p in self.points)

    def to_json(self) -> str:
        return json.dumps([list(p) for p in self.points])

    @classmethod
    def from_json(cls, text: str) -> "PointConfig":
        data = json.loads(text)
        if not isinstance(data, list) or not all(isinstance(p, list) for p in data):
            raise ConfigError("configuration JSON must be an array of integer arrays")
        return cls(data)

    @classmethod
    def load(cls, path: str | Path) -> "PointConfig":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def random_config(rng: np.random.Generator, n: int, d: int, box: int) -> PointConfig:
    """``n`` distinct points drawn uniformly from ``{0..box-1}^d``."""
    if n > box**d:
        raise ConfigError(f"cannot place {n} distinct points in a box of {box ** d} sites")
    flat = rng.choice(box**d, size=n, replace=False)
    coords = np.array(np.unravel_index(flat, (box,) * d)).T
    return PointConfig(coords.tolist())


def _check_same_dim(p: Sequence[int], q: Sequence[int]) -> None:
    if len(p) != len(q):
        raise ConfigError(f"dimension mismatch: {len(p)} vs {len(q)}")


def dist_key(p: Sequence[int], q: Sequence[int], metric: str = EUCLIDEAN) -> int:
    """Exact integer key ordering pairs by distance.

    Squared distance for the Euclidean metric, the distance itself for sup.
    """
    _check_metric(metric)
    _check_same_dim(p, q)
    if metric == SUP:
        return max(abs(a - b) for a, b in zip(p, q))
    return sum((a - b) ** 2 for a, b in zip(p, q))


def key_to_dist(key, metric: str = EUCLIDEAN):
    if metric == SUP:
        return np.asarray(key, dtype=float) if isinstance(key, np.ndarray) else float(key)
    return np.sqrt(key) if isinstance(key, np.ndarray) else math.sqrt(key)


def dist(p: Sequence[int], q: Sequence[int], metric: str = EUCLIDEAN) -> float:
    return float(key_to_dist(dist_key(p, q, metric), metric))


def sup_dist(p: Sequence[int], q: Sequence[int]) -> int:
    """The sup-metric distance as an exact integer."""
    return dist_key(p, q, SUP)


def key_matrix(X: PointConfig, Y: PointConfig, metric: str = EUCLIDEAN) -> np.ndarray:
    """Integer matrix of :func:`dist_key` values for all pairs (x_j, y_k)."""
    _check_metric(metric)
    if len(X) and len(Y) and X.dim != Y.dim:
        raise ConfigError(f"dimension mismatch: {X.dim} vs {Y.dim}")
    diff = X.array()[:, None, :] - Y.array()[None, :, :]
    if metric == SUP:
        return np.abs(diff).max(axis=2, initial=0)
    return (diff**2).sum(axis=2)


def distance_matrix(X: PointConfig, Y: PointConfig, metric: str = EUCLIDEAN) -> np.ndarray:
    return key_to_dist(key_matrix(X, Y, metric), metric).astype(float)


def hausdorff_distance(X: PointConfig, Y: PointConfig) -> float:
    if len(X) == 0 or len(Y) == 0:
        raise ConfigError("Hausdorff distance needs nonempty configurations")
    k = key_matrix(X, Y)
    return math.sqrt(max(k.min(axis=1).max(), k.min(axis=0).max()))


def _check_pair_sizes(X: PointConfig, Y: PointConfig, cap: int) -> None:
    if len(X) != len(Y):
        raise ConfigError(f"configurations differ in size: {len(X)} vs {len(Y)}")
    if len(X) > cap:
        raise SizeCapError(f"n={len(X)} exceeds the enumeration cap {cap}")


def brute_dm(X: PointConfig, Y: PointConfig, metric: str = EUCLIDEAN) -> float:
    """Bottleneck distance by enumerating all of S_n."""
    _check_pair_sizes(X, Y, MAX_ORACLE_N)
    n = len(X)
    if n == 0:
        return 0.0
    k = key_matrix(X, Y, metric).tolist()
    best = min(max(k[j][p[j]] for j in range(n)) for p in itertools.permutations(range(n)))
    return float(key_to_dist(best, metric))


def brute_ds(X: PointConfig, Y: PointConfig, metric: str = EUCLIDEAN) -> float:
    """Sum distance by enumerating all of S_n."""
    _check_pair_sizes(X, Y, MAX_ORACLE_N)
    n = len(X)
    c = distance_matrix(X, Y, metric).tolist()
    return min(
        (math.fsum(c[j][p[j]] for j in range(n)) for p in itertools.permutations(range(n))),
        default=0.0,
    )


def perfect_pairings(items: Sequence[int]):
    """Yield every perfect pairing of ``items`` as a list of 2-tuples."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for i, partner in enumerate(rest):
        for tail in perfect_pairings(rest[:i] + rest[i + 1 :]):
            yield [(first, partner)] + tail


def brute_ds_pairing(X: PointConfig, metric: str = EUCLIDEAN) -> float:
    """Minimum total length over all perfect pairings of X, by enumeration."""
    if len(X) % 2:
        raise ConfigError("pairing distance needs an even number of points")
    if len(X) > MAX_ORACLE_PAIRING:
        raise SizeCapError(f"2n={len(X)} exceeds the enumeration cap {MAX_ORACLE_PAIRING}")
    c = distance_matrix(X, X, metric).tolist()
    return min(
        math.fsum(c[a][b] for a, b in pairing)
        for pairing in perfect_pairings(tuple(range(len(X))))
    )
