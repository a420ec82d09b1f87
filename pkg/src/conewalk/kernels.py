"""Backend selection and deterministic chunked execution of the path kernels.

The compiled extension is used when it imports; set ``CONEWALK_BACKEND=python``
to force the NumPy fallback. Samples are cut into fixed-size chunks that do
not depend on the thread count, each chunk is reduced on its own, and chunk
results are combined in index order, so estimates are bit-identical for any
``threads``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from . import _pykernel
from . import rng as crng
from .cones import Cone
from .harmonic import HarmonicForm
from .laws import IncrementLaw

try:
    from . import _kernel as _ckernel
except ImportError:  # pragma: no cover - depends on the build
    _ckernel = None

CHUNK = 1 << 14
_EMPTY_TABLE = np.zeros(2)


def available_backends() -> list[str]:
    return ["cython", "python"] if _ckernel is not None else ["python"]


def default_backend() -> str:
    forced = os.environ.get("CONEWALK_BACKEND", "").strip().lower()
    if forced == "python" or _ckernel is None:
        return "python"
    return "cython"


def _cone_args(form: HarmonicForm):
    c = form.cone
    table = form.table.m1_values if form.table is not None else _EMPTY_TABLE
    dtheta = form.table.dtheta if form.table is not None else 1.0
    args = (c.kind.value, c.dimension, int(c.product_form), float(c.angle), float(c.p), float(dtheta))
    return args, np.ascontiguousarray(table, dtype=float)


def _law_args(law: IncrementLaw):
    tail = law.tail_index if math.isfinite(law.tail_index) else 0.0
    return (law.kind.value, law.d, law.draws_per_step, float(tail), float(law.scale))


def _check(form: HarmonicForm, law: IncrementLaw, checkpoints) -> np.ndarray:
    if law.d != form.cone.dimension:
        raise ValueError(f"law dimension {law.d} does not match cone dimension {form.cone.dimension}")
    cp = np.ascontiguousarray(checkpoints, dtype=np.int64)
    if cp.ndim != 1 or cp.size == 0 or np.any(cp < 0) or np.any(np.diff(cp) <= 0):
        raise ValueError("checkpoints must be a non-empty strictly increasing sequence of non-negative integers")
    return cp


def simulate_block(form: HarmonicForm, law: IncrementLaw, starts: np.ndarray, keys: np.ndarray,
                   checkpoints, backend: str | None = None):
    """Run one block of paths. Returns ``(tau, pos, runmax)``.

    ``tau[i]`` is the exit step, or ``horizon + 1`` when path ``i`` survives the
    last checkpoint. ``pos[i, c]`` is the position at ``min(tau, checkpoints[c])``
    and ``runmax[i, c]`` the largest norm visited up to that time.
    """
    cp = _check(form, law, checkpoints)
    d = form.cone.dimension
    starts = np.ascontiguousarray(np.atleast_2d(starts), dtype=float)
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    n = len(keys)
    if starts.shape[0] not in (1, n) or starts.shape[1] != d:
        raise ValueError("starts must have shape (1, d) or (n, d)")
    tau = np.empty(n, dtype=np.int64)
    pos = np.empty((n, len(cp), d))
    runmax = np.empty((n, len(cp)))
    if n == 0:
        return tau, pos, runmax
    if (backend or default_backend()) == "cython":
        cargs, table = _cone_args(form)
        _ckernel.simulate(cargs, table, _law_args(law), starts, keys, cp, tau, pos, runmax)
    else:
        _pykernel.simulate(form.cone, form, law, starts, keys, cp, tau, pos, runmax)
    return tau, pos, runmax


def decompose_block(form: HarmonicForm, law: IncrementLaw, start: np.ndarray, keys: np.ndarray,
                    shifts: np.ndarray, checkpoints, backend: str | None = None):
    """Per-path ``(w1, w2, w3, lhs, tau)`` of the shifted-walk decomposition at each checkpoint."""
    cp = _check(form, law, checkpoints)
    start = np.ascontiguousarray(start, dtype=float)
    shifts = np.ascontiguousarray(shifts, dtype=float)
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    if shifts.shape != (cp[-1] + 1, form.cone.dimension):
        raise ValueError("shifts must have one row per step 0..kmax")
    n = len(keys)
    outs = [np.empty((n, len(cp))) for _ in range(4)]
    tau = np.empty(n, dtype=np.int64)
    if n == 0:
        return (*outs, tau)
    if (backend or default_backend()) == "cython":
        cargs, table = _cone_args(form)
        _ckernel.decompose(cargs, table, _law_args(law), start, keys, shifts, cp, *outs, tau)
    else:
        _pykernel.decompose(form.cone, form, law, start, keys, shifts, cp, *outs, tau)
    return (*outs, tau)


def chunk_ranges(n_samples: int, chunk: int = CHUNK) -> list[tuple[int, int]]:
    return [(s, min(chunk, n_samples - s)) for s in range(0, n_samples, chunk)]


def map_chunks(fn: Callable[[int, int], object], n_samples: int, threads: int = 1,
               chunk: int = CHUNK) -> list:
    """Apply ``fn(index0, count)`` to every chunk; results come back in chunk order."""
    ranges = chunk_ranges(n_samples, chunk)
    if threads <= 1 or len(ranges) <= 1:
        return [fn(s, c) for s, c in ranges]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda r: fn(*r), ranges))


def keys_for(seed: int, stream_id: int, index0: int, count: int) -> np.ndarray:
    return crng.path_keys(seed, stream_id, index0, count)


def cone_of(form: HarmonicForm) -> Cone:
    return form.cone
