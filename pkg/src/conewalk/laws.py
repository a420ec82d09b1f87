"""Standardised step distributions: zero mean, identity covariance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import rng as crng


class LawKind(Enum):
    GAUSSIAN = 0
    RADEMACHER = 1
    SPHERE = 2
    PARETO = 3


_ALIASES = {
    "gaussian": LawKind.GAUSSIAN,
    "gaussianstd": LawKind.GAUSSIAN,
    "normal": LawKind.GAUSSIAN,
    "rademacher": LawKind.RADEMACHER,
    "rademacherproduct": LawKind.RADEMACHER,
    "lattice": LawKind.RADEMACHER,
    "sphere": LawKind.SPHERE,
    "spherescaled": LawKind.SPHERE,
    "pareto": LawKind.PARETO,
    "studentlike": LawKind.PARETO,
    "heavy": LawKind.PARETO,
}


@dataclass(frozen=True)
class IncrementLaw:
    """A step law on R^d.

    ``pareto`` has independent symmetric coordinates with
    ``P(|Y| > t) = (1 + t)**(-tail_index)`` rescaled to unit variance; its
    absolute moments are finite below ``tail_index``.
    """

    kind: LawKind
    d: int
    tail_index: float = math.inf

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be positive")
        if self.kind is LawKind.PARETO and not self.tail_index > 2:
            raise ValueError(f"pareto tail index must exceed 2, got {self.tail_index}")

    @classmethod
    def from_config(cls, variant: str, d: int, tail_index: float | None = None) -> IncrementLaw:
        try:
            kind = _ALIASES[variant.strip().lower().replace("_", "-")]
        except KeyError:
            raise ValueError(f"unknown law variant {variant!r}") from None
        if kind is LawKind.PARETO:
            if tail_index is None:
                raise ValueError("law.tail_index is required for the pareto law")
            return cls(kind, int(d), float(tail_index))
        return cls(kind, int(d))

    def to_config(self) -> dict:
        out = {"variant": self.kind.name.lower(), "dimension": self.d}
        if self.kind is LawKind.PARETO:
            out["tail_index"] = self.tail_index
        return out

    @property
    def moment_order(self) -> float:
        """Supremum of finite absolute moment orders."""
        if self.kind is LawKind.PARETO:
            return self.tail_index
        return math.inf

    @property
    def bounded(self) -> bool:
        return self.kind in (LawKind.RADEMACHER, LawKind.SPHERE)

    @property
    def max_step(self) -> float:
        """Largest possible step length (inf for unbounded laws)."""
        return math.sqrt(self.d) if self.bounded else math.inf

    @property
    def lattice(self) -> bool:
        return self.kind is LawKind.RADEMACHER

    @property
    def scale(self) -> float:
        """Multiplier bringing the raw variate to unit variance."""
        if self.kind is LawKind.PARETO:
            a = self.tail_index
            return math.sqrt((a - 1.0) * (a - 2.0) / 2.0)
        return 1.0

    @property
    def draws_per_step(self) -> int:
        if self.kind is LawKind.RADEMACHER:
            return 1
        if self.kind is LawKind.PARETO:
            return self.d
        if self.kind is LawKind.SPHERE and self.d == 1:
            return 1
        return 2 * ((self.d + 1) // 2)

    @property
    def label(self) -> str:
        if self.kind is LawKind.PARETO:
            return f"pareto(d={self.d}, tail={self.tail_index:g})"
        return f"{self.kind.name.lower()}(d={self.d})"

    def satisfies_moment_condition(self, p: float) -> bool:
        """Moments needed for V to exist: E|X|^p < inf if p > 2, else some order > 2."""
        if p > 2:
            return self.moment_order > p
        return self.moment_order > 2

    def steps(self, keys: np.ndarray, step: int) -> np.ndarray:
        """Increments number ``step`` (1-based) for every path key; shape ``(len(keys), d)``."""
        n = len(keys)
        d = self.d
        c0 = (step - 1) * self.draws_per_step
        if self.kind is LawKind.RADEMACHER:
            bits = crng.draw(keys, c0)
            out = np.empty((n, d))
            for j in range(d):
                out[:, j] = ((bits >> np.uint64(j)) & np.uint64(1)).astype(np.float64) * 2.0 - 1.0
            return out
        if self.kind is LawKind.PARETO:
            out = np.empty((n, d))
            for j in range(d):
                bits = crng.draw(keys, c0 + j)
                mag = crng.to_unit(bits) ** (-1.0 / self.tail_index) - 1.0
                sign = (bits & np.uint64(1)).astype(np.float64) * 2.0 - 1.0
                out[:, j] = sign * mag * self.scale
            return out
        if self.kind is LawKind.SPHERE and d == 1:
            bits = crng.draw(keys, c0)
            return ((bits & np.uint64(1)).astype(np.float64) * 2.0 - 1.0)[:, None]
        out = np.empty((n, 2 * ((d + 1) // 2)))
        for k in range(len(out[0]) // 2):
            u1 = crng.to_unit(crng.draw(keys, c0 + 2 * k))
            u2 = crng.to_unit(crng.draw(keys, c0 + 2 * k + 1))
            r = np.sqrt(-2.0 * np.log(u1))
            out[:, 2 * k] = r * np.cos(2.0 * math.pi * u2)
            out[:, 2 * k + 1] = r * np.sin(2.0 * math.pi * u2)
        out = out[:, :d]
        if self.kind is LawKind.SPHERE:
            out *= math.sqrt(d) / np.sqrt(np.sum(out * out, axis=1))[:, None]
        return out

    def sample(self, n: int, seed: int, stream_id: int = 0) -> np.ndarray:
        """``n`` independent draws, one per sample index of the given stream."""
        return self.steps(crng.path_keys(seed, stream_id, 0, n), 1)


def sample_increment(law: IncrementLaw, rng: np.random.Generator) -> np.ndarray:
    """A single increment, keyed by 64 random bits taken from ``rng``."""
    key = rng.integers(0, 2**64, size=1, dtype=np.uint64)
    return law.steps(key, 1)[0]
