"""Geometric laws, integer histograms, total variation and truncated moments.

Total variation here is sum_x |p(x) - q(x)|, without the factor 1/2, so it
ranges over [0, 2].
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

TAIL_EPS = 1e-12


@dataclass(frozen=True)
class GeomDist:
    """Geometric law on {0, 1, ...} with mean ``lam``: P(k) = (1/(1+lam)) (lam/(1+lam))^k."""

    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"geometric mean must be positive, got {self.lam!r}")

    @property
    def ratio(self) -> float:
        return self.lam / (1.0 + self.lam)

    @property
    def mean(self) -> float:
        return self.lam

    @property
    def variance(self) -> float:
        return self.lam + self.lam**2

    def pmf(self, k):
        k = np.asarray(k)
        return np.exp(-math.log1p(self.lam) - k * math.log1p(1.0 / self.lam))

    def tail(self, k: int) -> float:
        """P(X >= k)."""
        return math.exp(-k * math.log1p(1.0 / self.lam)) if k > 0 else 1.0

    def cutoff(self, eps: float = TAIL_EPS) -> int:
        """Smallest K with P(X >= K) < eps."""
        return int(math.ceil(-math.log(eps) / math.log1p(1.0 / self.lam))) + 1

    def truncated_mean(self, M: float) -> float:
        # E[X ^ M] = sum_{j < floor M} P(X > j) + frac(M) P(X > floor M)
        if math.isinf(M):
            return self.lam
        L = math.floor(M)
        q = self.ratio
        return self.lam * (1.0 - q**L) + (M - L) * q ** (L + 1)


@dataclass
class EmpiricalDist:
    """Exact histogram of nonnegative integer observations."""

    counts: Counter = field(default_factory=Counter)

    @classmethod
    def from_samples(cls, values: Iterable[int]) -> EmpiricalDist:
        values = np.asarray(list(values) if not isinstance(values, np.ndarray) else values).ravel()
        if values.size and values.min() < 0:
            raise ValueError("observations must be nonnegative integers")
        vals, cnts = np.unique(values.astype(np.int64), return_counts=True)
        return cls(Counter({int(v): int(c) for v, c in zip(vals, cnts)}))

    @classmethod
    def from_dict(cls, d: Mapping) -> EmpiricalDist:
        return cls(Counter({int(k): int(v) for k, v in d.items()}))

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def max_value(self) -> int:
        return max(self.counts) if self.counts else -1

    def add(self, value: int, count: int = 1) -> None:
        self.counts[int(value)] += count

    def merge(self, other: EmpiricalDist) -> EmpiricalDist:
        return EmpiricalDist(self.counts + other.counts)

    def pmf(self, k):
        k = np.asarray(k, dtype=np.int64)
        dense = np.zeros(self.max_value + 1)
        for v, c in self.counts.items():
            dense[v] = c
        out = np.zeros(k.shape)
        inside = (k >= 0) & (k < dense.size)
        out[inside] = dense[k[inside]] / self.total
        return out

    def tail(self, k: int) -> float:
        return sum(c for v, c in self.counts.items() if v >= k) / self.total

    @property
    def mean(self) -> float:
        return sum(v * c for v, c in self.counts.items()) / self.total

    @property
    def variance(self) -> float:
        mu = self.mean
        return sum(c * (v - mu) ** 2 for v, c in self.counts.items()) / self.total

    def truncated_mean(self, M: float) -> float:
        return sum(c * min(v, M) for v, c in self.counts.items()) / self.total

    def to_dict(self) -> dict:
        return {str(v): self.counts[v] for v in sorted(self.counts)}

    def csv_rows(self) -> list[tuple[int, int, float]]:
        t = self.total
        return [(v, self.counts[v], self.counts[v] / t) for v in sorted(self.counts)]


def _as_dist(d):
    if isinstance(d, (GeomDist, EmpiricalDist)):
        return d
    if isinstance(d, Mapping):
        return EmpiricalDist.from_dict(d)
    raise TypeError(f"cannot interpret {type(d).__name__} as a distribution")


def _support_end(d) -> int | None:
    return d.max_value + 1 if isinstance(d, EmpiricalDist) else None


def tv_distance(p, q) -> float:
    """sum_x |p(x) - q(x)| over the nonnegative integers."""
    p, q = _as_dist(p), _as_dist(q)
    ends = [_support_end(p), _support_end(q)]
    finite = [e for e in ends if e is not None]
    if len(finite) == 2:
        K = max(finite)
    else:
        geo = [d for d in (p, q) if isinstance(d, GeomDist)]
        K = max(finite + [g.cutoff() for g in geo])
    ks = np.arange(K)
    head = float(np.abs(p.pmf(ks) - q.pmf(ks)).sum()) if K else 0.0
    # beyond K at most one law has mass; if both do, both tails are < TAIL_EPS
    return head + abs(p.tail(K) - q.tail(K))


def tv_geom_bound(lam: float, lam2: float) -> float:
    """2 |lam - lam2| min((1+lam)/(1+lam2), (1+lam2)/(1+lam))."""
    if not (lam > 0 and lam2 > 0):
        raise ValueError("geometric means must be positive")
    r = (1.0 + lam) / (1.0 + lam2)
    return 2.0 * abs(lam - lam2) * min(r, 1.0 / r)


def truncated_mean(d, M: float) -> float:
    """E[min(X, M)]."""
    if M < 0:
        raise ValueError("truncation level must be >= 0")
    return _as_dist(d).truncated_mean(M)


def excess_mean(d, M: float) -> float:
    """E[(X - M)^+] = E[X] - E[min(X, M)]."""
    d = _as_dist(d)
    return d.mean - truncated_mean(d, M)


def empirical_tv_to_geom(e: EmpiricalDist, lam: float) -> float:
    if not isinstance(e, EmpiricalDist):
        e = _as_dist(e)
    if e.total == 0:
        raise ValueError("empty histogram")
    return tv_distance(e, GeomDist(lam))
