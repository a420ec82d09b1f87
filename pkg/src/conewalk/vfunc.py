"""Estimators of the positive harmonic function V of the killed walk.

Two constructions are provided:

* shifted limit: ``E[u(x + g_k + S(k)); tau_x > k]`` as ``k`` grows, where
  ``g_k = k**(1/2 - gamma) R0 x0`` pushes evaluation points into the cone,
  together with its pathwise split ``u0 - w1 + w2 + w3``;
* schedule: ``E[u(x + S(n_m)); tau_x > n_m]`` along
  ``n_m = floor(n0 ** ((1 - eps) ** -m))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr

from . import kernels
from . import rng as crng
from .harmonic import HarmonicForm
from .laws import IncrementLaw
from .stats import Accumulator, EstimateCI, ratio_with_stderr
from .walk import form_for, require_inside, run_paths

IDENTITY_RTOL = 1e-9
STABLE_FACTOR = 5.0


class DecompositionError(RuntimeError):
    """The pathwise decomposition failed to balance; this is a bug, not noise."""


@dataclass(frozen=True)
class ShiftSequence:
    """Deterministic interior shifts ``g_k = k**(1/2 - gamma) R0 x0``."""

    gamma: float
    R0: float
    x0: np.ndarray
    p: float = math.inf

    def __post_init__(self):
        cap = min(0.5, self.p)
        if not 0 < self.gamma < cap:
            raise ValueError(f"gamma must lie in (0, {cap:g}), got {self.gamma}")
        if self.R0 <= 0:
            raise ValueError("R0 must be positive")
        x0 = np.asarray(self.x0, dtype=float)
        if abs(np.linalg.norm(x0) - 1.0) > 1e-12:
            raise ValueError("x0 must be a unit vector")
        object.__setattr__(self, "x0", x0)

    @classmethod
    def for_cone(cls, form_or_cone, gamma: float | None = None) -> ShiftSequence:
        form = form_for(form_or_cone)
        x0, r0 = form.cone.starlike_data()
        p = form.p
        if gamma is None:
            gamma = min(0.5, p) / 4
        return cls(float(gamma), float(r0), x0, p)

    def magnitude(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        return k ** (0.5 - self.gamma) * self.R0

    def value(self, k: int) -> np.ndarray:
        return float(self.magnitude(k)) * self.x0

    def table(self, kmax: int) -> np.ndarray:
        """Rows ``g_0 .. g_kmax``."""
        return np.outer(self.magnitude(np.arange(kmax + 1)), self.x0)

    def increment_constant(self, kmax: int) -> float:
        """max over 2 <= k <= kmax of |g_k - g_{k-1}| k**(1/2 + gamma)."""
        if kmax < 2:
            return 0.0
        k = np.arange(2, kmax + 1)
        diff = self.magnitude(k) - self.magnitude(k - 1)
        return float(np.max(np.abs(diff) * k ** (0.5 + self.gamma)))

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "R0": self.R0, "x0": self.x0.tolist()}


@dataclass(frozen=True)
class Schedule:
    """Horizons ``n_m = floor(n0 ** ((1 - eps) ** -m))`` for ``m = 0..m_max``."""

    n0: int
    epsilon: float = 0.1
    m_max: int = 3

    def __post_init__(self):
        if self.n0 < 2:
            raise ValueError("n0 must be at least 2")
        if not 0 < self.epsilon < 0.5:
            raise ValueError("epsilon must lie in (0, 1/2)")
        if self.m_max < 0:
            raise ValueError("m_max must be non-negative")

    @property
    def terms(self) -> list[int]:
        out = []
        for m in range(self.m_max + 1):
            # exact integer floor of n0**e: guard against pow rounding just below an integer
            v = self.n0 ** ((1.0 - self.epsilon) ** (-m))
            f = math.floor(v)
            if f + 1 - v < 1e-9 * v:
                f += 1
            out.append(int(f))
        if any(b <= a for a, b in zip(out, out[1:])):
            raise ValueError(f"schedule is not strictly increasing: {out}")
        return out

    @classmethod
    def up_to(cls, n0: int, epsilon: float, n_cap: int) -> Schedule:
        """Longest schedule whose last horizon does not exceed ``n_cap``."""
        m = 0
        while Schedule(n0, epsilon, m + 1).terms[-1] <= n_cap:
            m += 1
        return cls(n0, epsilon, m)

    def to_dict(self) -> dict:
        return {"n0": self.n0, "epsilon": self.epsilon, "m_max": self.m_max, "terms": self.terms}


def _one_step_values(form: HarmonicForm, law: IncrementLaw, pts: np.ndarray, keys: np.ndarray) -> np.ndarray:
    return form.values(pts + law.steps(keys, 1))


def f_hat(form, law: IncrementLaw, x, n_samples: int, seed: int, stream_id: int = 0,
          threads: int = 1) -> EstimateCI:
    """Monte Carlo estimate of the one-step discrepancy ``E[u(x + X)] - u(x)``."""
    form = form_for(form)
    x = require_inside(form.cone, x)
    u0 = float(form(x))
    start = x[None, :]

    def work(i0, count):
        keys = kernels.keys_for(seed, stream_id, i0, count)
        return Accumulator.from_samples(_one_step_values(form, law, start, keys) - u0)

    acc = Accumulator.combine(kernels.map_chunks(work, n_samples, threads))
    return acc.estimate(0, seed, stream_id)


def gaussian_halfspace_f(z) -> np.ndarray:
    """Exact one-step discrepancy of ``u = x_d`` under standard Gaussian steps, at height ``z``."""
    z = np.asarray(z, dtype=float)
    return np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi) - z * ndtr(-z)


def direct_curve(form, law: IncrementLaw, x, horizons: Sequence[int], n_samples: int, seed: int,
                 stream_id: int = 0, threads: int = 1) -> Accumulator:
    """Joint moments of ``u(x + S(k)) 1{tau > k}`` over the horizons, one set of paths."""
    form = form_for(form)
    x = require_inside(form.cone, x)
    grid = np.asarray(horizons, dtype=np.int64)

    def reducer(tau, pos, runmax):
        n, c, d = pos.shape
        vals = form.values(pos.reshape(n * c, d)).reshape(n, c)
        vals[tau[:, None] <= grid[None, :]] = 0.0
        return Accumulator.from_samples(vals)

    return Accumulator.combine(run_paths(form, law, x, grid, n_samples, seed, reducer, stream_id, threads))


def estimate_direct(form, law: IncrementLaw, x, k: int, n_samples: int, seed: int,
                    stream_id: int = 0, threads: int = 1) -> EstimateCI:
    """``E[u(x + S(k)); tau_x > k]``."""
    form = form_for(form)
    x = require_inside(form.cone, x)
    if k == 0:
        return EstimateCI(float(form(x)), 0.0, n_samples, seed, stream_id)
    acc = direct_curve(form, law, x, [k], n_samples, seed, stream_id, threads)
    return acc.estimate(0, seed, stream_id, info={"k": int(k)})


@dataclass
class Decomposition:
    """Means of the three terms and of the shifted value, per checkpoint."""

    checkpoints: list
    u0: float
    w1: list
    w2: list
    w3: list
    lhs: list
    identity_violations: int
    max_identity_error: float
    w1_monotone_violations: int
    n_samples: int
    seed: int
    stream_id: int = 0
    shift: dict = field(default_factory=dict)

    def rebuilt(self, i: int = -1) -> float:
        """``u0 - E[w1] + E[w2] + E[w3]`` at checkpoint ``i``."""
        return self.u0 - self.w1[i].mean + self.w2[i].mean + self.w3[i].mean

    def to_dict(self) -> dict:
        return {
            "checkpoints": self.checkpoints, "u0": self.u0,
            "w1": [e.to_dict() for e in self.w1], "w2": [e.to_dict() for e in self.w2],
            "w3": [e.to_dict() for e in self.w3], "lhs": [e.to_dict() for e in self.lhs],
            "identity_violations": self.identity_violations,
            "max_identity_error": self.max_identity_error,
            "w1_monotone_violations": self.w1_monotone_violations,
            "n_samples": self.n_samples, "seed": self.seed, "stream_id": self.stream_id,
            "shift": self.shift,
        }


def decompose_paths(form, law: IncrementLaw, x, k, shift: ShiftSequence, n_samples: int,
                    seed: int, stream_id: int = 0, threads: int = 1, strict: bool = True,
                    backend: str | None = None) -> Decomposition:
    """Per-path split ``u(x + g_k + S(k)) 1{tau > k} = u(x) - w1 + w2 + w3``.

    ``k`` may be a single horizon or an increasing grid evaluated on the same
    paths. Every path is checked against the identity at tolerance
    ``1e-9 * max(1, |u(x)|)``; with ``strict`` any breach raises
    :class:`DecompositionError`.
    """
    form = form_for(form)
    x = require_inside(form.cone, x)
    grid = [int(k)] if np.ndim(k) == 0 else [int(v) for v in k]
    cp = np.asarray(grid, dtype=np.int64)
    shifts = shift.table(int(cp[-1]))
    u0 = float(form(x))
    tol = IDENTITY_RTOL * max(1.0, abs(u0))

    def work(i0, count):
        keys = kernels.keys_for(seed, stream_id, i0, count)
        w1, w2, w3, lhs, tau = kernels.decompose_block(form, law, x, keys, shifts, cp, backend)
        err = np.abs(lhs - (u0 - w1 + w2 + w3))
        bad = int(np.count_nonzero(~(err <= tol)))
        mono = int(np.count_nonzero(np.diff(w1, axis=1) < 0)) if w1.shape[1] > 1 else 0
        acc = Accumulator.from_samples(np.hstack([w1, w2, w3, lhs]))
        return acc, bad, float(np.max(err)) if err.size else 0.0, mono

    parts = kernels.map_chunks(work, n_samples, threads)
    acc = Accumulator.combine(p[0] for p in parts)
    bad = sum(p[1] for p in parts)
    worst = max(p[2] for p in parts)
    mono = sum(p[3] for p in parts)
    if strict and bad:
        raise DecompositionError(f"{bad} paths break the decomposition identity (max error {worst:.3e})")
    c = len(cp)
    est = [[acc.estimate(j * c + i, seed, stream_id, info={"k": grid[i]}) for i in range(c)] for j in range(4)]
    return Decomposition(grid, u0, est[0], est[1], est[2], est[3], bad, worst, mono,
                         n_samples, seed, stream_id, shift.to_dict())


def estimate_shifted(form, law: IncrementLaw, x, k: int, shift: ShiftSequence, n_samples: int,
                     seed: int, stream_id: int = 0, threads: int = 1) -> EstimateCI:
    """``E[u(x + g_k + S(k)); tau_x > k]``; the exit time uses the unshifted walk."""
    form = form_for(form)
    x = require_inside(form.cone, x)
    if k == 0:
        return EstimateCI(float(form(x + shift.value(0))), 0.0, n_samples, seed, stream_id)
    dec = decompose_paths(form, law, x, k, shift, n_samples, seed, stream_id, threads)
    return dec.lhs[-1]


def expected_w3(form, law: IncrementLaw, x, k: int, shift: ShiftSequence, n_samples: int, seed: int,
                f: Callable | None = None, inner: int = 64, stream_id: int = 0) -> EstimateCI:
    """Compensator of the step-telescoping term: ``sum_{l<k} f(x + g_l + S(l)) 1{tau > l}``.

    ``f`` maps an ``(N, d)`` array to one-step discrepancies; without it each
    evaluation is an inner average over ``inner`` fresh steps (unbiased).
    """
    form = form_for(form)
    x = require_inside(form.cone, x)
    g = shift.table(k)
    child = crng.child_seed(seed, 1)

    def work(i0, count):
        keys = kernels.keys_for(seed, stream_id, i0, count)
        y = np.tile(x, (count, 1))
        alive = np.ones(count, dtype=bool)
        total = np.zeros(count)
        for l in range(k):
            idx = np.nonzero(alive)[0]
            if idx.size == 0:
                break
            pts = y[idx] + g[l]
            if f is not None:
                total[idx] += f(pts)
            else:
                ikeys = crng.path_keys(child, l, 0, idx.size * inner)
                rep = np.repeat(pts, inner, axis=0)
                fv = form.values(rep + law.steps(ikeys, 1)).reshape(idx.size, inner).mean(axis=1)
                total[idx] += fv - form.values(pts)
            y[idx] += law.steps(keys[idx], l + 1)
            alive[idx] = form.cone._contains(y[idx])
        return Accumulator.from_samples(total)

    acc = Accumulator.combine(kernels.map_chunks(work, n_samples))
    return acc.estimate(0, seed, stream_id, info={"k": k})


def _stability(ests: list[EstimateCI]) -> float:
    """Largest pairwise gap in the top half of a sequence, in units of combined stderr."""
    top = ests[len(ests) // 2:]
    worst = 0.0
    for i in range(len(top)):
        for j in range(i + 1, len(top)):
            gap = abs(top[i].mean - top[j].mean)
            se = math.hypot(top[i].stderr, top[j].stderr)
            worst = max(worst, gap / se if se > 0 else (0.0 if gap == 0 else math.inf))
    return worst


def estimate_v_construction1(form, law: IncrementLaw, x, shift: ShiftSequence | None,
                             k_grid: Sequence[int], n_samples: int, seed: int, stream_id: int = 0,
                             threads: int = 1) -> tuple[EstimateCI, dict]:
    """Shifted-limit estimate of V(x): the value at the largest ``k`` of the grid.

    All grid points share paths. ``diagnostics['stability']`` is the largest
    gap over the top half of the grid in combined-stderr units; above 5 the
    estimate is flagged ``unstable``.
    """
    form = form_for(form)
    grid = [int(v) for v in k_grid]
    if len(grid) < 4 or grid[0] < 1 or grid[-1] < 100 * grid[0]:
        raise ValueError("k_grid needs at least 4 positive points spanning two decades")
    if shift is None:
        shift = ShiftSequence.for_cone(form)
    dec = decompose_paths(form, law, x, grid, shift, n_samples, seed, stream_id, threads)
    stab = _stability(dec.lhs)
    flags = ("unstable",) if stab > STABLE_FACTOR else ()
    last = dec.lhs[-1]
    v = EstimateCI(last.mean, last.stderr, n_samples, seed, stream_id, flags,
                   {"k": grid[-1], "construction": 1})
    diag = {"k_grid": grid, "values": [e.mean for e in dec.lhs], "stderrs": [e.stderr for e in dec.lhs],
            "stability": stab, "identity_violations": dec.identity_violations, "shift": shift.to_dict()}
    return v, diag


def estimate_v_construction2(form, law: IncrementLaw, x, schedule: Schedule, n_samples: int,
                             seed: int, stream_id: int = 0, threads: int = 1) -> tuple[EstimateCI, list[dict]]:
    """Schedule estimate of V(x) from ``E[u(x + S(n_m)); tau > n_m]``.

    The returned value is the last term that agrees with its predecessor to
    within 5 combined stderr; when no pair agrees the last term is returned
    flagged ``unstable``. ``per_term`` rows carry each term and the ratio to
    its predecessor.
    """
    if schedule.n0 < 32:
        raise ValueError("schedule.n0 must be at least 32")
    form = form_for(form)
    terms = schedule.terms
    acc = direct_curve(form, law, x, terms, n_samples, seed, stream_id, threads)
    cov = acc.mean_covariance()
    per_term = []
    for i, n in enumerate(terms):
        row = {"m": i, "n": n, "mean": float(acc.mean[i]), "stderr": float(acc.stderr[i])}
        if i:
            prev = float(acc.mean[i - 1])
            row["ratio"] = row["mean"] / prev if prev else math.nan
            gap_var = cov[i, i] + cov[i - 1, i - 1] - 2 * cov[i, i - 1]
            row["gap"] = row["mean"] - prev
            row["gap_stderr"] = math.sqrt(max(gap_var, 0.0))
        per_term.append(row)
    chosen, flags = len(terms) - 1, ("unstable",)
    for i in range(len(terms) - 1, 0, -1):
        r = per_term[i]
        if abs(r["gap"]) <= STABLE_FACTOR * r["gap_stderr"] or r["gap"] == 0:
            chosen, flags = i, ()
            break
    v = EstimateCI(per_term[chosen]["mean"], per_term[chosen]["stderr"], n_samples, seed, stream_id, flags,
                   {"n": terms[chosen], "construction": 2})
    return v, per_term


def ratio_decay_slope(per_term: list[dict]) -> float | None:
    """Log-log slope of ``|ratio - 1|`` against ``n`` over the schedule terms.

    Purely descriptive: no decay rate is asserted. ``None`` with fewer than two
    usable ratios.
    """
    pts = [(r["n"], abs(r["ratio"] - 1.0)) for r in per_term if "ratio" in r and abs(r["ratio"] - 1.0) > 0]
    if len(pts) < 2:
        return None
    n, dev = np.log(np.array(pts, dtype=float)).T
    return float(np.polyfit(n, dev, 1)[0])


def v_direct_oracle(form, law: IncrementLaw, n: int, n_inner: int) -> Callable:
    """Nested-MC oracle ``V_hat(y) = E[u(y + S(n)); tau > n]`` for :func:`harmonicity_residual`."""
    form = form_for(form)

    def oracle(points: np.ndarray, seed: int) -> np.ndarray:
        pts = np.atleast_2d(points)
        m = len(pts)
        vals = np.zeros(m)
        inside = form.cone._contains(pts)
        # each point gets its own child stream; one kernel call covers many points
        per_call = max(1, kernels.CHUNK // n_inner)
        idx = np.nonzero(inside)[0]
        for s in range(0, idx.size, per_call):
            block = idx[s:s + per_call]
            keys = np.concatenate([crng.path_keys(crng.child_seed(seed, int(i)), 0, 0, n_inner) for i in block])
            starts = np.repeat(pts[block], n_inner, axis=0)
            tau, pos, _ = kernels.simulate_block(form, law, starts, keys, [n])
            u = form.values(pos[:, 0, :])
            u[tau <= n] = 0.0
            vals[block] = u.reshape(len(block), n_inner).mean(axis=1)
        return vals

    oracle.budget = {"n": n, "n_inner": n_inner}
    return oracle


def harmonicity_residual(form, law: IncrementLaw, x, v_oracle: Callable, n_samples: int, seed: int,
                         stream_id: int = 0, v_at_x: EstimateCI | None = None,
                         n_reference: int | None = None) -> EstimateCI:
    """``E[V(x + X); tau_x > 1] - V(x)`` for a supplied V.

    ``v_oracle(points, seed)`` returns V at an ``(N, d)`` array. Exact oracles
    can ignore the seed; Monte Carlo oracles must derive one independent stream
    per point from it. Lattice laws in dimension <= 10 are averaged exactly
    over the ``2**d`` steps; otherwise the ``n_samples`` outer steps come from
    ``(seed, stream_id)``, shared across calls. ``V(x)`` itself is evaluated
    ``n_reference`` times (default ``n_samples``) with separate inner streams,
    and its stderr is folded into the total.
    """
    form = form_for(form)
    x = require_inside(form.cone, x)
    d = form.cone.dimension
    inner_seed = crng.child_seed(seed, 2)
    ref_seed = crng.child_seed(seed, 3)
    if law.lattice and d <= 10:
        steps = np.array([[1.0 if (s >> j) & 1 else -1.0 for j in range(d)] for s in range(2 ** d)])
        weights = np.full(len(steps), 1.0 / len(steps))
    else:
        steps = law.steps(kernels.keys_for(seed, stream_id, 0, n_samples), 1)
        weights = None
    pts = x[None, :] + steps
    vals = np.where(form.cone._contains(pts), v_oracle(pts, inner_seed), 0.0)
    if weights is not None:
        mean_out = float(weights @ vals)
        mean_vals = vals
    else:
        mean_out = float(vals.mean())
        mean_vals = vals
    reps = int(n_reference or n_samples)
    ref = np.asarray(v_oracle(np.repeat(x[None, :], reps, axis=0), ref_seed), dtype=float)
    v_x = float(ref.mean())
    var_ref = float(ref.var(ddof=1)) / reps if reps > 1 else 0.0
    if v_at_x is not None:
        v_x, var_ref = v_at_x.mean, v_at_x.stderr ** 2
    if weights is not None:
        # exact outer average: only inner noise remains, estimated from V(x) replicates
        var_out = float(np.sum(weights ** 2)) * var_ref * reps if reps > 1 else 0.0
    else:
        var_out = float(mean_vals.var(ddof=1)) / len(mean_vals) if len(mean_vals) > 1 else 0.0
    se = math.sqrt(max(var_out + var_ref, 0.0))
    return EstimateCI(mean_out - v_x, se, len(vals), seed, stream_id,
                      info={"v_x": v_x, "outer_mean": mean_out, "budget": getattr(v_oracle, "budget", None)})


def ratio_construction1(form, law: IncrementLaw, x_num, x_den, shift: ShiftSequence | None, k: int,
                        n_samples: int, seed: int, stream_id: int = 0, threads: int = 1) -> dict:
    """``V(x_num) / V(x_den)`` from shifted-limit estimates at horizon ``k`` on common paths.

    Both starts consume the same per-path streams; the stderr of the ratio
    uses the joint covariance (delta method).
    """
    form = form_for(form)
    xa = require_inside(form.cone, x_num)
    xb = require_inside(form.cone, x_den)
    if shift is None:
        shift = ShiftSequence.for_cone(form)
    cp = np.asarray([int(k)], dtype=np.int64)
    shifts = shift.table(int(k))

    def work(i0, count):
        keys = kernels.keys_for(seed, stream_id, i0, count)
        la = kernels.decompose_block(form, law, xa, keys, shifts, cp)[3][:, 0]
        lb = kernels.decompose_block(form, law, xb, keys, shifts, cp)[3][:, 0]
        return Accumulator.from_samples(np.column_stack([la, lb]))

    acc = Accumulator.combine(kernels.map_chunks(work, n_samples, threads))
    cov = acc.mean_covariance()
    r, se = ratio_with_stderr(acc.mean[0], acc.mean[1], cov[0, 0], cov[1, 1], cov[0, 1])
    return {"ratio": float(r), "stderr": float(se), "numerator": acc.estimate(0, seed, stream_id),
            "denominator": acc.estimate(1, seed, stream_id), "k": int(k), "shift": shift.to_dict()}
