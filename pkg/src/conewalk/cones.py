"""Supported cones: membership, boundary distance and starlike shift data.

All queries accept a single point of shape ``(d,)`` or a batch of shape
``(N, d)`` and return a scalar or an array of length ``N`` accordingly.
Cones are open; a point on the boundary is outside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class ConeKind(Enum):
    HALF_LINE = 0
    HALF_SPACE = 1
    WEDGE = 2
    ORTHANT = 3
    CIRCULAR = 4


_ALIASES = {
    "half-line": ConeKind.HALF_LINE,
    "halfline": ConeKind.HALF_LINE,
    "half-space": ConeKind.HALF_SPACE,
    "halfspace": ConeKind.HALF_SPACE,
    "half-plane": ConeKind.HALF_SPACE,
    "wedge": ConeKind.WEDGE,
    "wedge2d": ConeKind.WEDGE,
    "orthant": ConeKind.ORTHANT,
    "quarter-plane": ConeKind.ORTHANT,
    "circular": ConeKind.CIRCULAR,
    "circular-cone": ConeKind.CIRCULAR,
    "circularcone3d": ConeKind.CIRCULAR,
}


def as_points(x, d: int) -> tuple[np.ndarray, bool]:
    """Coerce ``x`` to a 2-D float array of points, remembering if it was a single point."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim <= 1
    arr = np.atleast_2d(arr.reshape(-1) if single else arr)
    if arr.shape[1] != d:
        raise ValueError(f"point dimension {arr.shape[1]} does not match cone dimension {d}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("points must have finite coordinates")
    return arr, single


def _ray_distance(r: np.ndarray, angle: np.ndarray) -> np.ndarray:
    # distance from a point at radius r whose direction makes `angle` with a ray
    angle = np.abs(angle)
    angle = np.minimum(angle, 2 * math.pi - angle)
    return np.where(angle < math.pi / 2, r * np.sin(np.minimum(angle, math.pi / 2)), r)


@dataclass(frozen=True)
class Cone:
    """One of the enumerated cones.

    The wedge is ``{(r, theta): 0 < theta < angle}`` in the plane; the circular
    cone has its axis along the last coordinate and half-angle ``angle``; the
    half-space is ``{x_d > 0}``.
    """

    kind: ConeKind
    dimension: int
    angle: float = 0.0
    mesh: int = 4096
    _p: float = field(default=0.0, repr=False, compare=False)

    def __post_init__(self):
        d, a = self.dimension, self.angle
        if self.kind is ConeKind.HALF_LINE and d != 1:
            raise ValueError("half-line cone is one-dimensional")
        if self.kind is ConeKind.WEDGE:
            if d != 2:
                raise ValueError("wedge cone is two-dimensional")
            if not 0 < a < 2 * math.pi:
                raise ValueError(f"wedge opening angle must lie in (0, 2pi), got {a}")
        if self.kind is ConeKind.CIRCULAR:
            if d != 3:
                raise ValueError("circular cone is three-dimensional")
            if not 0 < a < math.pi:
                raise ValueError(f"circular cone half-angle must lie in (0, pi), got {a}")
        if self.kind in (ConeKind.HALF_SPACE, ConeKind.ORTHANT) and d < 1:
            raise ValueError("dimension must be at least 1")
        object.__setattr__(self, "_p", self._compute_p())

    # -- constructors -----------------------------------------------------
    @classmethod
    def half_line(cls) -> Cone:
        return cls(ConeKind.HALF_LINE, 1)

    @classmethod
    def half_space(cls, d: int) -> Cone:
        return cls(ConeKind.HALF_SPACE, d)

    @classmethod
    def wedge(cls, alpha: float) -> Cone:
        return cls(ConeKind.WEDGE, 2, float(alpha))

    @classmethod
    def orthant(cls, d: int) -> Cone:
        return cls(ConeKind.ORTHANT, d)

    @classmethod
    def circular(cls, theta0: float, mesh: int = 4096) -> Cone:
        return cls(ConeKind.CIRCULAR, 3, float(theta0), int(mesh))

    @classmethod
    def from_config(cls, variant: str, dimension: int | None = None,
                    angle: float | None = None, mesh: int = 4096) -> Cone:
        """Build a cone from the ``cone.variant`` / ``cone.dimension`` / ``cone.angle`` keys."""
        try:
            kind = _ALIASES[variant.strip().lower().replace("_", "-")]
        except KeyError:
            raise ValueError(f"unknown cone variant {variant!r}") from None
        if kind is ConeKind.HALF_LINE:
            return cls.half_line()
        if kind in (ConeKind.HALF_SPACE, ConeKind.ORTHANT):
            if dimension is None:
                raise ValueError(f"cone.dimension is required for {variant}")
            return cls(kind, int(dimension))
        if angle is None:
            raise ValueError(f"cone.angle is required for {variant}")
        if kind is ConeKind.WEDGE:
            return cls.wedge(angle)
        return cls.circular(angle, mesh)

    def to_config(self) -> dict:
        names = {ConeKind.HALF_LINE: "half-line", ConeKind.HALF_SPACE: "half-space",
                 ConeKind.WEDGE: "wedge", ConeKind.ORTHANT: "orthant",
                 ConeKind.CIRCULAR: "circular"}
        out = {"variant": names[self.kind], "dimension": self.dimension}
        if self.kind in (ConeKind.WEDGE, ConeKind.CIRCULAR):
            out["angle"] = self.angle
        return out

    # -- exponent ----------------------------------------------------------
    def _compute_p(self) -> float:
        if self.kind in (ConeKind.HALF_LINE, ConeKind.HALF_SPACE):
            return 1.0
        if self.kind is ConeKind.ORTHANT:
            return float(self.dimension)
        if self.kind is ConeKind.WEDGE:
            return math.pi / self.angle
        from .eigen import circular_cone_lambda1, p_exponent

        table = circular_cone_lambda1(self.angle, self.mesh)
        return p_exponent(table.lambda1, 3)

    @property
    def p(self) -> float:
        return self._p

    @property
    def product_form(self) -> bool:
        """True when the harmonic function is the coordinate product (orthant, right-angle wedge)."""
        return self.kind is ConeKind.ORTHANT or (
            self.kind is ConeKind.WEDGE and abs(self.angle - math.pi / 2) < 1e-12)

    @property
    def label(self) -> str:
        if self.kind is ConeKind.WEDGE:
            return f"wedge(alpha={self.angle:.6g})"
        if self.kind is ConeKind.CIRCULAR:
            return f"circular(theta0={self.angle:.6g})"
        return f"{self.kind.name.lower()}(d={self.dimension})"

    # -- queries -----------------------------------------------------------
    def polar_angle(self, pts: np.ndarray) -> np.ndarray:
        """Wedge: angle in [0, 2pi). Circular cone: angle from the axis in [0, pi]."""
        if self.kind is ConeKind.WEDGE:
            th = np.arctan2(pts[:, 1], pts[:, 0])
            return np.where(th < 0, th + 2 * math.pi, th)
        if self.kind is ConeKind.CIRCULAR:
            rho = np.hypot(pts[:, 0], pts[:, 1])
            return np.arctan2(rho, pts[:, 2])
        raise TypeError("polar angle only defined for wedge and circular cones")

    def _contains(self, pts: np.ndarray) -> np.ndarray:
        k = self.kind
        if k is ConeKind.HALF_LINE or k is ConeKind.HALF_SPACE:
            return pts[:, -1] > 0
        if k is ConeKind.ORTHANT:
            return np.all(pts > 0, axis=1)
        if k is ConeKind.WEDGE:
            # (0, alpha) = {y > 0} op {r sin(alpha - theta) > 0}; op is "and" iff alpha <= pi
            ca, sa = math.cos(self.angle), math.sin(self.angle)
            upper = pts[:, 1] > 0
            below_far_face = pts[:, 0] * sa - pts[:, 1] * ca > 0
            if self.angle <= math.pi:
                return upper & below_far_face
            return upper | below_far_face
        r = np.sqrt(np.sum(pts * pts, axis=1))
        return (r > 0) & (pts[:, 2] > math.cos(self.angle) * r)

    def contains(self, x) -> bool | np.ndarray:
        pts, single = as_points(x, self.dimension)
        out = self._contains(pts)
        return bool(out[0]) if single else out

    def _dist(self, pts: np.ndarray) -> np.ndarray:
        k = self.kind
        inside = self._contains(pts)
        if k is ConeKind.HALF_LINE or k is ConeKind.HALF_SPACE:
            d = pts[:, -1]
        elif k is ConeKind.ORTHANT:
            d = np.min(pts, axis=1)
        elif k is ConeKind.WEDGE:
            r = np.hypot(pts[:, 0], pts[:, 1])
            th = self.polar_angle(pts)
            d = np.minimum(_ray_distance(r, th), _ray_distance(r, self.angle - th))
        else:
            r = np.sqrt(np.sum(pts * pts, axis=1))
            th = self.polar_angle(pts)
            d = _ray_distance(r, self.angle - th)
        return np.where(inside, d, 0.0)

    def dist_boundary(self, x) -> float | np.ndarray:
        """Euclidean distance to the boundary; 0 for points outside the cone."""
        pts, single = as_points(x, self.dimension)
        out = self._dist(pts)
        return float(out[0]) if single else out

    def shift_margin(self) -> float:
        """Lower bound of dist(x0 + K, boundary) for the canonical unit shift x0."""
        if self.kind is ConeKind.ORTHANT:
            return 1.0 / math.sqrt(self.dimension)
        if self.kind is ConeKind.WEDGE:
            return math.sin(self.angle / 2)
        if self.kind is ConeKind.CIRCULAR:
            return math.sin(self.angle)
        return 1.0

    def starlike_data(self) -> tuple[np.ndarray, float]:
        """Canonical unit shift direction x0 and scale R0 with dist(R0 x0 + K, boundary) > 1."""
        d = self.dimension
        if self.kind is ConeKind.ORTHANT:
            x0 = np.full(d, 1.0 / math.sqrt(d))
        elif self.kind is ConeKind.WEDGE:
            x0 = np.array([math.cos(self.angle / 2), math.sin(self.angle / 2)])
        else:
            x0 = np.zeros(d)
            x0[-1] = 1.0
        margin = self.shift_margin()
        r0 = 2.0 if 2.0 * margin > 1.0 else 2.0 / margin
        return x0, r0

    def sample_interior(self, n: int, rng: np.random.Generator,
                        rmin: float = 1e-2, rmax: float = 1e4) -> np.ndarray:
        """Points of K with log-uniform radius and uniform direction conditioned on K."""
        d = self.dimension
        out = np.empty((0, d))
        while len(out) < n:
            m = 4 * (n - len(out)) + 16
            dirs = rng.standard_normal((m, d))
            dirs /= np.linalg.norm(dirs, axis=1)[:, None]
            r = np.exp(rng.uniform(math.log(rmin), math.log(rmax), m))
            pts = dirs * r[:, None]
            out = np.vstack([out, pts[self._contains(pts) & (self._dist(pts) > 0)]])
        return out[:n]


@dataclass(frozen=True)
class InteriorSetParams:
    """Horizon, exponent and variant of an expanding interior subset of K.

    ``plain`` is ``{dist >= n**(1/2 - eps)}``; ``shifted`` is
    ``{dist >= (n**(1/2 - eps) + |x| / n**(2 eps)) / 2}``.
    """

    n: int
    epsilon: float
    variant: str = "plain"

    def __post_init__(self):
        if not 0 < self.epsilon < 0.5:
            raise ValueError("epsilon must lie in (0, 1/2)")
        if self.variant not in ("plain", "shifted"):
            raise ValueError("variant must be 'plain' or 'shifted'")
        if self.n < 1:
            raise ValueError("horizon n must be positive")


def in_interior_set(cone: Cone, params: InteriorSetParams, x) -> bool | np.ndarray:
    pts, single = as_points(x, cone.dimension)
    dist = cone._dist(pts)
    n, eps = float(params.n), params.epsilon
    if params.variant == "plain":
        threshold = n ** (0.5 - eps)
    else:
        threshold = 0.5 * (n ** (0.5 - eps) + np.linalg.norm(pts, axis=1) / n ** (2 * eps))
    out = cone._contains(pts) & (dist >= threshold)
    return bool(out[0]) if single else out


def contains(cone: Cone, x):
    return cone.contains(x)


def dist_boundary(cone: Cone, x):
    return cone.dist_boundary(x)


def starlike_data(cone: Cone):
    return cone.starlike_data()
