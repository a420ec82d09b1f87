"""Numerical checks of the large-n behaviour of the killed walk.

Tail exponents by weighted log-log regression, the x-independence of the
survival constant, the conditional limit density ``H0 u(y) exp(-|y|^2/2)``
of ``(x + S(n)) / sqrt(n)``, and flatness of the lattice local-limit ratio.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, stats

from .cones import ConeKind
from .harmonic import HarmonicForm
from .laws import IncrementLaw
from .stats import EstimateCI
from .walk import form_for, require_inside, run_paths, survival_curve


@dataclass(frozen=True)
class FitResult:
    """Weighted least squares of ``log P`` against ``log n``."""

    slope: float
    intercept: float
    slope_stderr: float
    intercept_stderr: float
    r_squared: float
    chi2: float
    dof: int
    grid: list
    dropped: list = field(default_factory=list)

    def slope_band(self, z: float = 2.0) -> tuple[float, float]:
        return self.slope - z * self.slope_stderr, self.slope + z * self.slope_stderr

    def to_dict(self) -> dict:
        return asdict(self)


def weighted_loglog_fit(ns, estimates, stderrs) -> FitResult:
    """Fit ``log est = a + b log n`` with weights ``(est / stderr)**2`` (delta method)."""
    n = np.asarray(ns, dtype=float)
    est = np.asarray(estimates, dtype=float)
    se = np.asarray(stderrs, dtype=float)
    if len(n) < 3:
        raise ValueError("need at least three grid points to fit")
    if np.any(est <= 0) or np.any(se <= 0):
        raise ValueError("estimates and stderrs must be positive")
    if np.any(np.diff(n) <= 0):
        raise ValueError("grid must be strictly increasing")
    X = np.column_stack([np.ones_like(n), np.log(n)])
    y = np.log(est)
    w = (est / se) ** 2
    A = X.T @ (w[:, None] * X)
    cov = np.linalg.inv(A)
    coef = cov @ (X.T @ (w * y))
    resid = y - X @ coef
    chi2 = float(np.sum(w * resid ** 2))
    ybar = np.sum(w * y) / np.sum(w)
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    r2 = 1.0 - chi2 / ss_tot if ss_tot > 0 else 1.0
    grid = [(int(a), float(b), float(c)) for a, b, c in zip(n, est, se)]
    return FitResult(float(coef[1]), float(coef[0]), float(math.sqrt(cov[1, 1])), float(math.sqrt(cov[0, 0])),
                     r2, chi2, len(n) - 2, grid)


def tail_exponent_fit(cone, law: IncrementLaw, x, n_grid: Sequence[int], n_samples: int, seed: int,
                      stream_id: int = 0, threads: int = 1, min_survivors: int = 100) -> FitResult:
    """Slope of ``log P(tau_x > n)`` against ``log n``; the target is ``-p/2``.

    Grid point ``i`` uses stream ``stream_id + i`` so the points are
    independent. Points with fewer than ``min_survivors`` survivors are
    dropped from the top of the grid with a warning.
    """
    grid = [int(v) for v in n_grid]
    if len(grid) < 3 or grid[-1] < 100 * grid[0]:
        raise ValueError("n_grid must have at least 3 points spanning two decades")
    pts, dropped = [], []
    for i, n in enumerate(grid):
        est = survival_curve(cone, law, x, [n], n_samples, seed, stream_id + i, threads)[0]
        if est.info["survivors"] < min_survivors:
            dropped = grid[i:]
            warnings.warn(f"only {est.info['survivors']} survivors at n={n}; truncating grid at {grid[i - 1] if i else None}",
                          stacklevel=2)
            break
        pts.append(est)
    if len(pts) < 3:
        raise ValueError("fewer than three grid points with enough survivors; raise n_samples")
    fit = weighted_loglog_fit([e.info["n"] for e in pts], [e.mean for e in pts], [e.stderr for e in pts])
    return FitResult(**{**asdict(fit), "dropped": dropped})


@dataclass
class KappaTrace:
    rows: list
    per_x_limit: list
    spread: float
    stabilized: list

    def to_dict(self) -> dict:
        return asdict(self)


def kappa_ratio_trace(cone, law: IncrementLaw, x_list, n_grid: Sequence[int], v_hats: Sequence[EstimateCI],
                      n_samples: int, seed: int, stream_id: int = 0, threads: int = 1) -> KappaTrace:
    """``P(tau_x > n) n**(p/2) / V(x)`` for each start and horizon.

    The spread is ``(max - min) / mean`` of the largest-n ratios over starts.
    ``stabilized[i]`` tells whether the last two ratios of start ``i`` agree
    within two propagated stderrs.
    """
    form = form_for(cone)
    if len(v_hats) != len(x_list):
        raise ValueError("need one V estimate per starting point")
    p = form.p
    rows, limits, stable = [], [], []
    for i, (x, v) in enumerate(zip(x_list, v_hats)):
        curve = survival_curve(form, law, x, n_grid, n_samples, seed, stream_id + i, threads)
        trace = []
        for est in curve:
            n = est.info["n"]
            r = est.mean * n ** (p / 2) / v.mean
            rel = math.hypot(est.stderr / est.mean if est.mean > 0 else math.inf, v.stderr / v.mean)
            trace.append((r, r * rel))
            rows.append({"x_index": i, "x": list(map(float, x)), "n": n, "survival": est.mean,
                         "survival_stderr": est.stderr, "v_hat": v.mean, "v_stderr": v.stderr,
                         "ratio": r, "ratio_stderr": r * rel})
        limits.append({"ratio": trace[-1][0], "stderr": trace[-1][1]})
        if len(trace) > 1:
            gap = abs(trace[-1][0] - trace[-2][0])
            stable.append(bool(gap < 2 * math.hypot(trace[-1][1], trace[-2][1])))
        else:
            stable.append(True)
    vals = np.array([lim["ratio"] for lim in limits])
    spread = float((vals.max() - vals.min()) / vals.mean()) if len(vals) > 1 else 0.0
    return KappaTrace(rows, limits, spread, stable)


# ---- conditional limit density -------------------------------------------------

def _angular_profile(form: HarmonicForm, grid: int = 20001):
    """Polar-angle coordinate, its range and the unnormalised angular density of the target.

    Returns ``(angle_fn, theta, weight, sphere_factor)`` where the limit
    density restricted to the angle is proportional to ``weight`` on
    ``theta``, and ``sphere_factor`` is the full angular integral of
    ``u`` on the unit sphere. ``angle_fn`` is None when only the radius is binned.
    """
    c = form.cone
    d = c.dimension
    if c.kind is ConeKind.HALF_LINE:
        return None, None, None, 1.0
    if c.kind is ConeKind.ORTHANT and d > 2:
        return None, None, None, _orthant_sphere_integral(d)
    if c.kind is ConeKind.HALF_SPACE and d > 3:
        factor = 2 * math.pi ** ((d - 1) / 2) / math.gamma((d - 1) / 2) / (d - 1)
        return None, None, None, factor
    if d == 2:
        top = c.angle if c.kind is ConeKind.WEDGE else (math.pi / 2 if c.kind is ConeKind.ORTHANT else math.pi)
        theta = np.linspace(0.0, top, grid)
        pts = np.column_stack([np.cos(theta), np.sin(theta)])
        weight = form.values(pts)
        weight[0] = weight[-1] = 0.0
        fn = lambda y: np.mod(np.arctan2(y[:, 1], y[:, 0]), 2 * math.pi)
        return fn, theta, weight, float(integrate.trapezoid(weight, theta))
    # d == 3: polar angle from the last axis, azimuth integrated out
    top = c.angle if c.kind is ConeKind.CIRCULAR else math.pi / 2
    theta = np.linspace(0.0, top, grid)
    pts = np.column_stack([np.sin(theta), np.zeros_like(theta), np.cos(theta)])
    weight = form.values(pts) * np.sin(theta)
    weight[-1] = 0.0
    fn = lambda y: np.arctan2(np.hypot(y[:, 0], y[:, 1]), y[:, 2])
    return fn, theta, weight, float(2 * math.pi * integrate.trapezoid(weight, theta))


def _orthant_sphere_integral(d: int) -> float:
    # int_{R_+^d} prod(y_i) e^{-|y|^2/2} dy = 1 = sphere integral * int_0^inf r^{2d-1} e^{-r^2/2} dr
    radial = 2.0 ** (d - 1) * math.gamma(d)
    return 1.0 / radial


def normalization_h0(form) -> float:
    """``H0 = 1 / int_K u(y) exp(-|y|^2/2) dy`` by quadrature."""
    form = form_for(form)
    c = form.cone
    d = c.dimension
    p = form.p
    radial = 2.0 ** ((p + d) / 2 - 1) * math.gamma((p + d) / 2)  # int_0^inf r^{p+d-1} e^{-r^2/2} dr
    if c.kind is ConeKind.HALF_LINE:
        return 1.0 / radial
    if c.kind is ConeKind.HALF_SPACE:
        return (2 * math.pi) ** (-(d - 1) / 2)
    if c.product_form:
        return 1.0
    _, _, _, sphere = _angular_profile(form)
    return 1.0 / (sphere * radial)


@dataclass
class DensityTestReport:
    bins: dict
    observed: list
    expected: list
    statistic: float
    dof: int
    p_value: float
    normalization_H0: float
    n_survivors: int
    overflow_fraction: float
    coordinate_means: list
    coordinate_stderrs: list
    radius_mean: float
    radius_stderr: float
    n: int = 0
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _radial_cdf_edges(p: float, d: int, n_bins: int, overflow_mass: float) -> np.ndarray:
    """Equal-mass radial edges of ``r**(p+d-1) exp(-r^2/2)``; last edge leaves ``overflow_mass`` beyond."""
    a = (p + d) / 2.0
    q = np.linspace(0.0, 1.0 - overflow_mass, n_bins + 1)
    return np.sqrt(2.0 * stats.gamma.ppf(q, a))


def _radial_mass(p: float, d: int, edges: np.ndarray) -> np.ndarray:
    a = (p + d) / 2.0
    return np.diff(stats.gamma.cdf(edges ** 2 / 2.0, a))


def conditional_density_test(cone, law: IncrementLaw, x, n: int, n_samples: int, bins: int = 40, seed: int = 0,
                             stream_id: int = 0, threads: int = 1, min_survivors: int = 10_000,
                             overflow_mass: float = 5e-4, angular_bins: int | None = None) -> DensityTestReport:
    """Chi-square test of surviving ``(x + S(n)) / sqrt(n)`` against ``H0 u(y) exp(-|y|^2/2)``.

    The target factorises into a radial law and an angular law, so cells are
    products of equal-mass radial and polar-angle bins (radius only for
    d = 1 and for cones without a single polar angle). Mass beyond the last
    radial edge forms one overflow cell.
    """
    form = form_for(cone)
    x = require_inside(form.cone, x)
    d = form.cone.dimension
    p = form.p
    angle_fn, theta, weight, _ = _angular_profile(form)
    if angle_fn is None:
        n_ang = 1
    else:
        n_ang = angular_bins or max(2, int(round(math.sqrt(bins / 2))))
        if bins % n_ang:
            n_ang = max(k for k in range(1, n_ang + 1) if bins % k == 0)
    n_rad = bins // n_ang
    r_edges = _radial_cdf_edges(p, d, n_rad, overflow_mass)
    if angle_fn is not None:
        cdf = integrate.cumulative_trapezoid(weight, theta, initial=0.0)
        cdf /= cdf[-1]
        a_edges = np.interp(np.linspace(0, 1, n_ang + 1), cdf, theta)
        a_edges[0], a_edges[-1] = theta[0], theta[-1]
    else:
        a_edges = None
    scale = math.sqrt(n)

    def reducer(tau, pos, runmax):
        keep = tau > n
        y = pos[keep, 0, :] / scale
        r = np.linalg.norm(y, axis=1)
        ri = np.searchsorted(r_edges, r, side="right") - 1
        ri = np.where(r >= r_edges[-1], n_rad, ri)
        if a_edges is not None:
            ai = np.clip(np.searchsorted(a_edges, angle_fn(y), side="right") - 1, 0, n_ang - 1)
        else:
            ai = np.zeros(len(r), dtype=int)
        cell = np.where(ri == n_rad, n_rad * n_ang, ri * n_ang + ai)
        counts = np.bincount(cell, minlength=n_rad * n_ang + 1)
        return counts, y.sum(axis=0), (y * y).sum(axis=0), r.sum(), (r * r).sum()

    parts = run_paths(form, law, x, [n], n_samples, seed, reducer, stream_id, threads)
    counts = np.sum([q[0] for q in parts], axis=0)
    total = int(counts.sum())
    if total < min_survivors:
        raise ValueError(f"only {total} survivors (need {min_survivors}); increase n_samples")
    s1 = np.sum([q[1] for q in parts], axis=0)
    s2 = np.sum([q[2] for q in parts], axis=0)
    r1 = sum(q[3] for q in parts)
    r2 = sum(q[4] for q in parts)
    means = s1 / total
    ses = np.sqrt(np.maximum(s2 / total - means ** 2, 0.0) * total / (total - 1) / total)
    rmean = r1 / total
    rse = math.sqrt(max(r2 / total - rmean ** 2, 0.0) * total / (total - 1) / total)
    mass = np.outer(_radial_mass(p, d, r_edges), np.full(n_ang, 1.0 / n_ang)).ravel()
    mass = np.append(mass, 1.0 - mass.sum())
    expected = mass * total
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    dof = len(counts) - 1
    bins_spec = {"radial_edges": r_edges.tolist(), "overflow_from": float(r_edges[-1]),
                 "angular_edges": None if a_edges is None else a_edges.tolist(),
                 "n_radial": n_rad, "n_angular": n_ang}
    return DensityTestReport(bins_spec, counts.tolist(), expected.tolist(), chi2, dof,
                             float(stats.chi2.sf(chi2, dof)), normalization_h0(form), total,
                             float(counts[-1] / total), means.tolist(), ses.tolist(), float(rmean), float(rse),
                             n, seed)


# ---- local limit theorem -----------------------------------------------------

@dataclass
class LocalCLTReport:
    rows: list
    cv: float
    mean_ratio: float
    dropped: list
    parity: str
    n: int
    n_samples: int
    v_hat: float

    def to_dict(self) -> dict:
        return asdict(self)


def reachable(x, y, n: int) -> bool:
    """Lattice reachability of ``y`` from ``x`` in ``n`` coordinatewise +-1 steps."""
    diff = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    if np.any(np.abs(diff) > n) or np.any(diff != np.round(diff)):
        return False
    return bool(np.all((np.round(diff).astype(np.int64) + n) % 2 == 0))


def central_lattice_points(cone, x, n: int, radius_factor: float = 1.5) -> list[tuple]:
    """Reachable lattice points of K with ``|y| <= radius_factor sqrt(n)``."""
    form = form_for(cone)
    d = form.cone.dimension
    x = np.asarray(x, dtype=float)
    rad = radius_factor * math.sqrt(n)
    lo = np.floor(-rad).astype(int)
    axes = [np.arange(lo, int(rad) + 1) for _ in range(d)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d).astype(float)
    mesh = mesh[(np.linalg.norm(mesh, axis=1) <= rad) & form.cone._contains(mesh)]
    return [tuple(int(v) for v in y) for y in mesh if reachable(x, y, n)]


def local_clt_ratio(cone, law: IncrementLaw, x, n: int, y_set=None, n_samples: int = 10**6, seed: int = 0,
                    v_hat: float | EstimateCI | None = None, min_hits: int = 50, stream_id: int = 0,
                    threads: int = 1) -> LocalCLTReport:
    """Flatness of ``n**(p/2 + d/2) P(x + S(n) = y, tau > n) / (V(x) u(y/sqrt n) exp(-|y|^2/2n))``.

    Points whose parity cannot be reached are excluded up front; points with
    fewer than ``min_hits`` hits are dropped with a warning. ``cv`` is the
    coefficient of variation of the ratio over the remaining points.
    """
    if not law.lattice:
        raise ValueError("the local limit ratio needs a lattice law")
    form = form_for(cone)
    x = require_inside(form.cone, x)
    d = form.cone.dimension
    p = form.p
    if y_set is None:
        y_set = central_lattice_points(form, x, n)
    ys = [tuple(int(v) for v in y) for y in y_set if reachable(x, y, n) and form.cone.contains(np.asarray(y, float))]
    if not ys:
        raise ValueError("no reachable lattice points in y_set")
    if v_hat is None:
        v = float(form(x))
    else:
        v = v_hat.mean if isinstance(v_hat, EstimateCI) else float(v_hat)
    targets = np.array(ys, dtype=np.int64)
    lo = targets.min(axis=0)
    span = targets.max(axis=0) - lo + 1
    index = {y: i for i, y in enumerate(ys)}
    flat = np.full(int(np.prod(span)), -1, dtype=np.int64)
    strides = np.cumprod(np.concatenate([[1], span[::-1][:-1]]))[::-1]
    flat[((targets - lo) * strides).sum(axis=1)] = np.arange(len(ys))

    def reducer(tau, pos, runmax):
        end = np.round(pos[tau > n, 0, :]).astype(np.int64) - lo
        ok = np.all((end >= 0) & (end < span), axis=1)
        slot = flat[(end[ok] * strides).sum(axis=1)]
        slot = slot[slot >= 0]
        return np.bincount(slot, minlength=len(ys))

    hits = np.sum(run_paths(form, law, x, [n], n_samples, seed, reducer, stream_id, threads), axis=0)
    rows, dropped = [], []
    for y in ys:
        h = int(hits[index[y]])
        if h < min_hits:
            dropped.append(list(y))
            continue
        yv = np.asarray(y, dtype=float)
        prob = h / n_samples
        denom = v * float(form(yv / math.sqrt(n))) * math.exp(-float(yv @ yv) / (2 * n))
        ratio = n ** (p / 2 + d / 2) * prob / denom
        rows.append({"y": list(y), "hits": h, "probability": prob, "ratio": ratio,
                     "ratio_stderr": ratio / math.sqrt(h)})
    if dropped:
        warnings.warn(f"dropped {len(dropped)} lattice points with fewer than {min_hits} hits", stacklevel=2)
    ratios = np.array([r["ratio"] for r in rows])
    cv = float(ratios.std(ddof=1) / ratios.mean()) if len(ratios) > 1 else 0.0
    parity = "y_i = x_i + n mod 2 in every coordinate"
    return LocalCLTReport(rows, cv, float(ratios.mean()) if len(ratios) else math.nan, dropped, parity,
                          n, n_samples, v)
