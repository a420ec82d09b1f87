"""Monte Carlo estimates and order-stable streaming moment accumulation."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass(frozen=True)
class EstimateCI:
    """A Monte Carlo mean with its standard error and the stream it came from."""

    mean: float
    stderr: float
    n_samples: int
    seed: int
    stream_id: int = 0
    flags: tuple = ()
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.stderr >= 0:
            raise ValueError(f"stderr must be non-negative, got {self.stderr}")

    def interval(self, z: float = 3.0) -> tuple[float, float]:
        return self.mean - z * self.stderr, self.mean + z * self.stderr

    def covers(self, value: float, z: float = 3.0) -> bool:
        return abs(self.mean - value) <= z * self.stderr

    @property
    def flagged(self) -> bool:
        return bool(self.flags)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["flags"] = list(self.flags)
        return out


class Accumulator:
    """Count, mean vector and co-moment matrix of a stream of sample vectors.

    Chunks are merged with the pairwise update of Chan et al., so the result
    depends only on the order in which chunks are merged, never on threads.
    """

    def __init__(self, dim: int):
        self.dim = dim
        self.count = 0
        self.mean = np.zeros(dim)
        self.comoment = np.zeros((dim, dim))

    @classmethod
    def from_samples(cls, values: np.ndarray) -> Accumulator:
        v = np.asarray(values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        acc = cls(v.shape[1])
        acc.count = v.shape[0]
        if acc.count:
            acc.mean = v.mean(axis=0)
            c = v - acc.mean
            acc.comoment = c.T @ c
        return acc

    def merge(self, other: Accumulator) -> Accumulator:
        if other.count == 0:
            return self
        if self.count == 0:
            self.count, self.mean, self.comoment = other.count, other.mean.copy(), other.comoment.copy()
            return self
        n = self.count + other.count
        delta = other.mean - self.mean
        self.comoment = self.comoment + other.comoment + np.outer(delta, delta) * (self.count * other.count / n)
        self.mean = self.mean + delta * (other.count / n)
        self.count = n
        return self

    @classmethod
    def combine(cls, parts) -> Accumulator:
        parts = list(parts)
        acc = cls(parts[0].dim if parts else 1)
        for p in parts:
            acc.merge(p)
        return acc

    @property
    def covariance(self) -> np.ndarray:
        """Sample covariance of one draw (ddof=1)."""
        if self.count < 2:
            return np.zeros((self.dim, self.dim))
        return self.comoment / (self.count - 1)

    @property
    def stderr(self) -> np.ndarray:
        if self.count < 2:
            return np.zeros(self.dim)
        return np.sqrt(np.maximum(np.diag(self.covariance), 0.0) / self.count)

    def mean_covariance(self) -> np.ndarray:
        """Covariance matrix of the mean vector."""
        if self.count < 2:
            return np.zeros((self.dim, self.dim))
        return self.covariance / self.count

    def estimate(self, i: int, seed: int, stream_id: int = 0, **kw) -> EstimateCI:
        return EstimateCI(float(self.mean[i]), float(self.stderr[i]), self.count, seed, stream_id, **kw)


def ratio_with_stderr(num: float, den: float, var_num: float, var_den: float,
                      cov: float = 0.0) -> tuple[float, float]:
    """Delta-method ratio ``num / den`` and its standard error."""
    r = num / den
    var = (var_num - 2.0 * r * cov + r * r * var_den) / (den * den)
    return r, math.sqrt(max(var, 0.0))


def binomial_stderr(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n) if n > 0 else math.inf
