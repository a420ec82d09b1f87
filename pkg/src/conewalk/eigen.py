"""Dirichlet ground state of the spherical cross-section.

Wedges have the closed form ``lambda1 = (pi/alpha)**2``. For a circular cone
of half-angle ``theta0`` in three dimensions the axisymmetric ground state
solves

    (sin(t) m'(t))' = -lambda sin(t) m(t),   m'(0) = 0,  m(theta0) = 0,

which is discretised on the cell-centred grid ``t_i = (i + 1/2) h`` with
``h = theta0 / (mesh + 1/2)``. The flux weight vanishes at the pole, so the
Neumann condition is natural and the pencil ``A m = lambda W m`` stays
symmetric positive definite. The smallest eigenvalue is found by Sturm
sequence bisection and the vector by inverse iteration.
"""

from __future__ import annotations

import csv
import functools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class EigenSolveError(RuntimeError):
    pass


def p_exponent(lambda1: float, d: int) -> float:
    """Homogeneity exponent of the cone-harmonic function from the ground-state eigenvalue."""
    if not lambda1 > 0:
        raise ValueError(f"lambda1 must be positive, got {lambda1}")
    if d < 2:
        raise ValueError("the eigenproblem needs d >= 2")
    shift = d / 2 - 1
    return math.sqrt(lambda1 + shift * shift) - shift


def wedge_lambda1(alpha: float) -> float:
    if not 0 < alpha < 2 * math.pi:
        raise ValueError(f"wedge opening must lie in (0, 2pi), got {alpha}")
    return (math.pi / alpha) ** 2


@dataclass(frozen=True)
class EigenTable:
    """Ground state tabulated on a uniform grid of ``[0, theta0]``, max-normalised."""

    theta0: float
    theta_grid: np.ndarray
    m1_values: np.ndarray
    lambda1: float
    mesh: int
    est_error: float
    node_theta: np.ndarray | None = None
    node_values: np.ndarray | None = None

    @property
    def dtheta(self) -> float:
        return self.theta0 / (len(self.theta_grid) - 1)

    def m1(self, theta) -> np.ndarray:
        """Linear interpolation; zero beyond ``theta0``."""
        theta = np.asarray(theta, dtype=float)
        out = np.interp(theta, self.theta_grid, self.m1_values, right=0.0)
        return np.where(theta >= self.theta0, 0.0, out)

    def dm1(self, theta) -> np.ndarray:
        """Angular derivative from node-centred differences of the table."""
        slope = np.gradient(self.m1_values, self.theta_grid)
        return np.interp(np.asarray(theta, dtype=float), self.theta_grid, slope)

    def p(self) -> float:
        return p_exponent(self.lambda1, 3)

    def save(self, prefix: str | Path) -> tuple[Path, Path]:
        """Write ``<prefix>.csv`` with (theta, m1) rows and ``<prefix>.json`` with the header."""
        prefix = Path(prefix)
        csv_path, json_path = prefix.with_suffix(".csv"), prefix.with_suffix(".json")
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "m1"])
            for t, m in zip(self.theta_grid, self.m1_values):
                w.writerow([repr(float(t)), repr(float(m))])
        header = {"lambda1": self.lambda1, "theta0": self.theta0, "mesh": self.mesh,
                  "est_error": self.est_error, "p": self.p()}
        json_path.write_text(json.dumps(header, indent=2) + "\n")
        return csv_path, json_path

    @classmethod
    def load(cls, prefix: str | Path) -> EigenTable:
        prefix = Path(prefix)
        header = json.loads(prefix.with_suffix(".json").read_text())
        data = np.loadtxt(prefix.with_suffix(".csv"), delimiter=",", skiprows=1, ndmin=2)
        return cls(theta0=float(header["theta0"]), theta_grid=data[:, 0], m1_values=data[:, 1],
                   lambda1=float(header["lambda1"]), mesh=int(header["mesh"]),
                   est_error=float(header["est_error"]))


def _pencil(theta0: float, mesh: int):
    h = theta0 / (mesh + 0.5)
    nodes = (np.arange(mesh) + 0.5) * h
    flux = np.sin(np.arange(1, mesh + 1) * h)  # at t_{i+1/2}
    flux_left = np.concatenate([[0.0], flux[:-1]])
    diag = (flux_left + flux) / h**2
    off = -flux[:-1] / h**2
    weight = np.sin(nodes)
    return nodes, diag, off, weight


def _sturm_count(diag: np.ndarray, off2: np.ndarray, x: float) -> int:
    """Number of eigenvalues of the symmetric tridiagonal matrix below ``x``."""
    count = 0
    q = 1.0
    tiny = 1e-300
    for i in range(len(diag)):
        q = diag[i] - x - (off2[i - 1] / q if i else 0.0)
        if q == 0.0:
            q = -tiny
        if q < 0.0:
            count += 1
    return count


def _solve_tridiagonal(diag, off, rhs):
    n = len(diag)
    c = np.empty(n - 1)
    d = np.empty(n)
    denom = diag[0]
    c[0] = off[0] / denom
    d[0] = rhs[0] / denom
    for i in range(1, n):
        denom = diag[i] - off[i - 1] * c[i - 1]
        if i < n - 1:
            c[i] = off[i] / denom
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom
    x = np.empty(n)
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


def _ground_state(theta0: float, mesh: int):
    nodes, diag, off, weight = _pencil(theta0, mesh)
    s = 1.0 / np.sqrt(weight)
    bdiag = diag * s * s
    boff = off * s[:-1] * s[1:]
    off2 = (boff * boff).tolist()
    bdiag_l = bdiag.tolist()

    # Rayleigh quotient of a positive trial vector bounds lambda1 from above
    trial = np.cos(0.5 * math.pi * nodes / theta0) / s
    bt = bdiag * trial
    bt[:-1] += boff * trial[1:]
    bt[1:] += boff * trial[:-1]
    hi = float(trial @ bt / (trial @ trial)) * (1 + 1e-6)
    lo = 0.0
    for _ in range(60):
        if _sturm_count(bdiag_l, off2, hi) >= 1:
            break
        hi *= 1.5
    else:
        raise EigenSolveError(f"no eigenvalue found below {hi}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _sturm_count(bdiag_l, off2, mid) >= 1:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 4e-16 * hi:
            break
    else:
        raise EigenSolveError("bisection did not converge")
    lam = 0.5 * (lo + hi)

    shift = lam - 1e-10 * lam
    y = np.ones(mesh)
    for _ in range(3):
        y = _solve_tridiagonal(bdiag - shift, boff, y)
        y /= np.max(np.abs(y))
    m = y * s
    if m[0] < 0:
        m = -m
    m /= np.max(m)
    if not np.all(m > 0):
        raise EigenSolveError("ground state is not positive on the open interval")
    return lam, nodes, m, (diag, off, weight)


def eigen_residual(theta0: float, mesh: int, lam: float, m: np.ndarray) -> float:
    """Sup-norm of ``A m - lam W m`` on the solve grid."""
    _, diag, off, weight = _pencil(theta0, mesh)
    am = diag * m
    am[:-1] += off * m[1:]
    am[1:] += off * m[:-1]
    return float(np.max(np.abs(am - lam * weight * m)))


@functools.lru_cache(maxsize=32)
def circular_cone_lambda1(theta0: float, mesh: int = 4096) -> EigenTable:
    """Solve the axisymmetric ground state of the cap of half-angle ``theta0``."""
    if not 0 < theta0 < math.pi:
        raise ValueError(f"theta0 must lie in (0, pi), got {theta0}")
    if mesh < 64:
        raise ValueError(f"mesh must be at least 64, got {mesh}")
    lam, nodes, m, _ = _ground_state(theta0, mesh)
    lam_coarse = _ground_state(theta0, mesh // 2)[0]
    est_error = abs(lam - lam_coarse) / 3.0

    # quadratic extrapolation to the pole, where m'(0) = 0
    m_pole = (9.0 * m[0] - m[1]) / 8.0
    theta_ext = np.concatenate([[0.0], nodes, [theta0]])
    m_ext = np.concatenate([[m_pole], m, [0.0]])
    grid = np.linspace(0.0, theta0, mesh + 1)
    values = np.interp(grid, theta_ext, m_ext)
    peak = values.max()
    return EigenTable(theta0=float(theta0), theta_grid=grid, m1_values=values / peak,
                      lambda1=float(lam), mesh=int(mesh), est_error=float(est_error),
                      node_theta=nodes, node_values=m / peak)
