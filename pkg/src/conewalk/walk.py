"""Killed random walks: single-path records, survival, exit-time moments and maxima."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .cones import Cone
from .harmonic import HarmonicForm
from .laws import IncrementLaw
from .stats import Accumulator, EstimateCI, binomial_stderr, ratio_with_stderr


@dataclass(frozen=True)
class KilledSampleRecord:
    """Summary of one path walked until exit or the horizon.

    ``tau`` is the exit step, or the horizon itself when ``censored``.
    """

    survived: bool
    tau: int
    censored: bool
    terminal: np.ndarray
    running_max: float
    exit_overshoot: np.ndarray | None


def form_for(cone_or_form) -> HarmonicForm:
    if isinstance(cone_or_form, HarmonicForm):
        return cone_or_form
    return HarmonicForm(cone_or_form)


def require_inside(cone: Cone, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if not cone.contains(x):
        raise ValueError(f"starting point {x.tolist()} is not inside {cone.label}")
    return x


def run_paths(form: HarmonicForm, law: IncrementLaw, x, checkpoints: Sequence[int], n_samples: int,
              seed: int, reducer: Callable, stream_id: int = 0, threads: int = 1,
              backend: str | None = None) -> list:
    """Simulate ``n_samples`` paths from ``x`` and reduce each chunk with ``reducer(tau, pos, runmax)``.

    Chunk results are returned in sample-index order.
    """
    start = np.asarray(x, dtype=float).reshape(1, -1)

    def work(i0, count):
        keys = kernels.keys_for(seed, stream_id, i0, count)
        return reducer(*kernels.simulate_block(form, law, start, keys, checkpoints, backend))

    return kernels.map_chunks(work, n_samples, threads)


def simulate_killed(cone, law: IncrementLaw, x, horizon: int, rng=0, stream_id: int = 0,
                    index: int = 0) -> KilledSampleRecord:
    """One path from ``x``; ``rng`` is an integer seed or a ``numpy`` Generator."""
    form = form_for(cone)
    x = require_inside(form.cone, x)
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if isinstance(rng, np.random.Generator):
        keys = rng.integers(0, 2**64, size=1, dtype=np.uint64)
    else:
        keys = kernels.keys_for(int(rng), stream_id, index, 1)
    tau, pos, runmax = kernels.simulate_block(form, law, x, keys, [horizon])
    t = int(tau[0])
    survived = t > horizon
    terminal = pos[0, 0].copy()
    return KilledSampleRecord(survived, horizon if survived else t, survived, terminal,
                              float(runmax[0, 0]), None if survived else terminal.copy())


def audit_path(cone, law: IncrementLaw, x, horizon: int, seed: int, stream_id: int = 0,
               index: int = 0) -> np.ndarray:
    """Materialised positions ``x + S(k)``, ``k = 0..horizon``, of the path with the same random stream."""
    keys = kernels.keys_for(seed, stream_id, index, 1)
    steps = np.vstack([law.steps(keys, t) for t in range(1, horizon + 1)]) if horizon else np.empty((0, law.d))
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return np.vstack([x, x + np.cumsum(steps, axis=0)])


def survival_curve(cone, law: IncrementLaw, x, n_grid: Sequence[int], n_samples: int, seed: int,
                   stream_id: int = 0, threads: int = 1) -> list[EstimateCI]:
    """Survival probabilities at every ``n`` of the grid from one set of paths."""
    form = form_for(cone)
    x = require_inside(form.cone, x)
    grid = np.asarray(n_grid, dtype=np.int64)
    if n_samples < 100:
        raise ValueError("n_samples must be at least 100")

    def reducer(tau, pos, runmax):
        return np.sum(tau[:, None] > grid[None, :], axis=0)

    alive = np.sum(run_paths(form, law, x, grid, n_samples, seed, reducer, stream_id, threads), axis=0)
    out = []
    for n, a in zip(grid, alive):
        p = a / n_samples
        out.append(EstimateCI(float(p), binomial_stderr(p, n_samples), n_samples, seed, stream_id,
                              info={"n": int(n), "survivors": int(a)}))
    return out


def survival_estimate(cone, law: IncrementLaw, x, n: int, n_samples: int, seed: int,
                      stream_id: int = 0, threads: int = 1) -> EstimateCI:
    """P(tau_x > n) with its binomial standard error."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return survival_curve(cone, law, x, [n], n_samples, seed, stream_id, threads)[0]


def tau_moment_probe(cone, law: IncrementLaw, x, beta: float, horizon: int, n_samples: int,
                     seed: int, stream_id: int = 0, threads: int = 1,
                     censor_tolerance: float = 0.01) -> EstimateCI:
    """E[min(tau, horizon)**(beta/2)].

    Requires ``0 < beta < p``. The censored contribution
    ``horizon**(beta/2) P(tau > horizon)`` is reported in ``info``; when it
    exceeds ``censor_tolerance`` of the estimate the result is flagged.
    """
    form = form_for(cone)
    p = form.p
    if not 0 < beta < p:
        raise ValueError(f"beta must lie in (0, p) = (0, {p:g}), got {beta}")
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    x = require_inside(form.cone, x)
    h = float(horizon)

    def reducer(tau, pos, runmax):
        t = np.minimum(tau, horizon).astype(float)
        return Accumulator.from_samples(np.column_stack([t ** (beta / 2), tau > horizon]))

    acc = Accumulator.combine(run_paths(form, law, x, [horizon], n_samples, seed, reducer, stream_id, threads))
    mean = float(acc.mean[0])
    censored = float(acc.mean[1])
    share = h ** (beta / 2) * censored / mean if mean > 0 else 0.0
    flags = ("censoring",) if share > censor_tolerance else ()
    return EstimateCI(mean, float(acc.stderr[0]), n_samples, seed, stream_id, flags,
                      {"beta": beta, "horizon": horizon, "censored_fraction": censored,
                       "censored_share": share})


@dataclass(frozen=True)
class MaxTailPoint:
    n: int
    truncated: EstimateCI
    tau_mean: EstimateCI
    ratio: float
    ratio_stderr: float


def max_tail_probe(cone, law: IncrementLaw, x, n, t_exp: float, eps: float, n_samples: int,
                   seed: int, stream_id: int = 0, threads: int = 1) -> list[MaxTailPoint]:
    """E[M(n)**t; tau > n, M(n) > n**(1/2 + eps/2)] against E[min(tau, n)] over a grid of n.

    ``M(n)`` is the running maximum of ``|x + S(k)|``. Each grid point uses its
    own stream (``stream_id + index``) so the points are independent.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if t_exp > law.moment_order:
        raise ValueError(f"t_exp={t_exp} exceeds the moment order of {law.label}")
    form = form_for(cone)
    x = require_inside(form.cone, x)
    grid = [int(n)] if np.ndim(n) == 0 else [int(v) for v in n]
    out = []
    for i, m in enumerate(grid):
        level = m ** (0.5 + eps / 2)

        def reducer(tau, pos, runmax, m=m, level=level):
            mx = runmax[:, 0]
            big = (tau > m) & (mx > level)
            return Accumulator.from_samples(np.column_stack([np.where(big, mx ** t_exp, 0.0),
                                                             np.minimum(tau, m)]))

        acc = Accumulator.combine(run_paths(form, law, x, [m], n_samples, seed, reducer,
                                            stream_id + i, threads))
        cov = acc.mean_covariance()
        r, rse = ratio_with_stderr(acc.mean[0], acc.mean[1], cov[0, 0], cov[1, 1], cov[0, 1])
        out.append(MaxTailPoint(m, acc.estimate(0, seed, stream_id + i), acc.estimate(1, seed, stream_id + i),
                                float(r), float(rse)))
    return out


def warn_moment_condition(law: IncrementLaw, p: float) -> bool:
    """Warn (and return False) when the law lacks the moments V needs to exist."""
    ok = law.satisfies_moment_condition(p)
    if not ok:
        warnings.warn(f"{law.label} has moment order {law.moment_order:g}; exponent p={p:g} "
                      "needs more for the existence theory", stacklevel=2)
    return ok

