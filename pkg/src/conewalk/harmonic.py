"""Brownian cone-harmonic function u, its gradient, and empirical checks of its bounds."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cones import Cone, ConeKind, as_points
from .eigen import EigenTable, circular_cone_lambda1


@dataclass(frozen=True)
class HarmonicForm:
    """The positive harmonic function of Brownian motion killed outside ``cone``.

    Normalisations: ``x`` on the half-line, ``x_d`` on the half-space, the
    coordinate product on the orthant and the right-angle wedge,
    ``r**p sin(p theta)`` on other wedges, and ``r**p m1(theta)`` with a
    max-normalised tabulated ``m1`` on the circular cone.
    """

    cone: Cone
    table: EigenTable | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.cone.kind is ConeKind.CIRCULAR and self.table is None:
            object.__setattr__(self, "table",
                               circular_cone_lambda1(self.cone.angle, self.cone.mesh))

    @property
    def p(self) -> float:
        return self.cone.p

    @property
    def closed_form(self) -> str:
        c = self.cone
        if c.kind is ConeKind.HALF_LINE:
            return "x"
        if c.kind is ConeKind.HALF_SPACE:
            return "x_d"
        if c.product_form:
            return "prod x_i"
        if c.kind is ConeKind.WEDGE:
            return "r^p sin(p theta)"
        return "r^p m1(theta)"

    def values(self, pts: np.ndarray) -> np.ndarray:
        """Vectorised u on an ``(N, d)`` array; zero outside the cone."""
        c = self.cone
        inside = c._contains(pts)
        if c.kind is ConeKind.HALF_LINE or c.kind is ConeKind.HALF_SPACE:
            val = pts[:, -1]
        elif c.product_form:
            val = np.prod(pts, axis=1)
        elif c.kind is ConeKind.WEDGE:
            r = np.hypot(pts[:, 0], pts[:, 1])
            th = c.polar_angle(pts)
            val = r ** c.p * np.sin(c.p * th)
        else:
            r = np.sqrt(np.sum(pts * pts, axis=1))
            val = r ** c.p * self.table.m1(c.polar_angle(pts))
        return np.where(inside, val, 0.0)

    def __call__(self, x):
        pts, single = as_points(x, self.cone.dimension)
        out = self.values(pts)
        return float(out[0]) if single else out

    def gradient(self, x) -> np.ndarray:
        pts, single = as_points(x, self.cone.dimension)
        if not np.all(self.cone._contains(pts)):
            raise ValueError("gradient of u is only defined inside the cone")
        c = self.cone
        g = np.zeros_like(pts)
        if c.kind is ConeKind.HALF_LINE or c.kind is ConeKind.HALF_SPACE:
            g[:, -1] = 1.0
        elif c.product_form:
            for i in range(c.dimension):
                g[:, i] = np.prod(np.delete(pts, i, axis=1), axis=1)
        elif c.kind is ConeKind.WEDGE:
            r = np.hypot(pts[:, 0], pts[:, 1])
            th = c.polar_angle(pts)
            p = c.p
            du_dr = p * r ** (p - 1) * np.sin(p * th)
            du_dth_over_r = p * r ** (p - 1) * np.cos(p * th)
            g[:, 0] = du_dr * np.cos(th) - du_dth_over_r * np.sin(th)
            g[:, 1] = du_dr * np.sin(th) + du_dth_over_r * np.cos(th)
        else:
            # radial part analytic, angular part from the table's differences
            r = np.sqrt(np.sum(pts * pts, axis=1))
            rho = np.hypot(pts[:, 0], pts[:, 1])
            th = c.polar_angle(pts)
            p = c.p
            du_dr = p * r ** (p - 1) * self.table.m1(th)
            du_dth_over_r = r ** (p - 1) * self.table.dm1(th)
            e_r = pts / r[:, None]
            with np.errstate(invalid="ignore", divide="ignore"):
                cos_phi = np.where(rho > 0, pts[:, 0] / rho, 1.0)
                sin_phi = np.where(rho > 0, pts[:, 1] / rho, 0.0)
            e_th = np.stack([np.cos(th) * cos_phi, np.cos(th) * sin_phi, -np.sin(th)], axis=1)
            g = du_dr[:, None] * e_r + du_dth_over_r[:, None] * e_th
        return g[0] if single else g


def u_eval(form: HarmonicForm, x):
    return form(x)


def grad_u(form: HarmonicForm, x):
    return form.gradient(x)


@dataclass
class BoundsReport:
    """Empirical constants of ``C1 dist**p <= u <= C2 |x|**(p-1) dist``."""

    lower_inf: float
    upper_sup: float
    lower_witness: np.ndarray
    upper_witness: np.ndarray
    sample_size: int

    @property
    def ok(self) -> bool:
        return bool(np.isfinite(self.lower_inf) and np.isfinite(self.upper_sup)
                    and self.lower_inf > 0 and self.upper_sup > 0)


def check_u_bounds(form: HarmonicForm, sample_size: int, rng_seed=0) -> BoundsReport:
    """Sample points of K and report inf u/dist**p and sup u/(|x|**(p-1) dist)."""
    if sample_size < 1:
        raise ValueError("sample_size must be at least 1")
    rng = np.random.default_rng(rng_seed)
    pts = form.cone.sample_interior(sample_size, rng)
    u = form.values(pts)
    dist = form.cone._dist(pts)
    norm = np.linalg.norm(pts, axis=1)
    lower = u / dist ** form.p
    upper = u / (norm ** (form.p - 1) * dist)
    i, j = int(np.argmin(lower)), int(np.argmax(upper))
    return BoundsReport(float(lower[i]), float(upper[j]), pts[i], pts[j], sample_size)


def central_laplacian(form: HarmonicForm, x, h: float) -> float:
    """Second-order 2d-point discrete Laplacian of u at ``x``."""
    x = np.asarray(x, dtype=float)
    d = x.size
    shifts = np.vstack([np.eye(d) * h, -np.eye(d) * h])
    vals = form.values(x[None, :] + shifts)
    return float((vals.sum() - 2 * d * form(x)) / (h * h))


def fd_gradient(form: HarmonicForm, x, h: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    d = x.size
    e = np.eye(d) * h
    return (form.values(x + e) - form.values(x - e)) / (2 * h)


def build(cone: Cone) -> HarmonicForm:
    return HarmonicForm(cone)


__all__ = ["HarmonicForm", "BoundsReport", "u_eval", "grad_u", "check_u_bounds",
           "central_laplacian", "fd_gradient", "build"]
