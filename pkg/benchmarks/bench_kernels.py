"""Throughput of the compiled kernel against the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--paths 20000] [--horizon 1024] [--repeat 3]

Each case runs the same keyed paths on both backends, checks the outputs
agree, and reports steps per second and the speed-up. Decompose rates
count nominal path-steps (paths x horizon), since killed paths keep
contributing their frozen terms.
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from conewalk import kernels
from conewalk.cones import Cone
from conewalk.harmonic import HarmonicForm
from conewalk.laws import IncrementLaw, LawKind
from conewalk.vfunc import ShiftSequence

CASES = [
    ("half-line / rademacher", Cone.half_line(), LawKind.RADEMACHER, [5.0]),
    ("orthant d=2 / rademacher", Cone.orthant(2), LawKind.RADEMACHER, [2.0, 3.0]),
    ("wedge 2pi/3 / gaussian", Cone.wedge(2 * math.pi / 3), LawKind.GAUSSIAN, [0.5, math.sqrt(3) / 2]),
    ("half-space d=3 / sphere", Cone.half_space(3), LawKind.SPHERE, [0.0, 0.0, 2.0]),
    ("circular pi/3 / gaussian", Cone.circular(math.pi / 3), LawKind.GAUSSIAN, [0.0, 0.0, 2.0]),
]


def _best(fn, repeat):
    best = math.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench(paths: int, horizon: int, repeat: int) -> list[dict]:
    backends = kernels.available_backends()
    keys = kernels.keys_for(12345, 0, 0, paths)
    cps = [horizon // 4, horizon // 2, horizon]
    rows = []
    for name, cone, kind, x in CASES:
        form, law = HarmonicForm(cone), IncrementLaw(kind, cone.dimension)
        starts = np.asarray(x, dtype=float)
        res = {}
        for b in backends:
            t, out = _best(lambda: kernels.simulate_block(form, law, starts, keys, cps, backend=b), repeat)
            steps = float(np.minimum(out[0], horizon).sum())
            res[b] = (t, steps / t, out)
        row = {"case": f"simulate: {name}"}
        for b, (t, rate, _) in res.items():
            row[b] = rate
        if len(res) == 2:
            a, p = res["cython"][2], res["python"][2]
            row["max_diff"] = max(float(np.max(np.abs(a[1] - p[1]))), float(np.max(np.abs(a[0] - p[0]))))
            row["speedup"] = res["python"][0] / res["cython"][0]
        rows.append(row)

        shifts = ShiftSequence.for_cone(form).table(horizon)
        res = {}
        for b in backends:
            t, out = _best(lambda: kernels.decompose_block(form, law, starts, keys, shifts, cps, backend=b), repeat)
            res[b] = (t, paths * horizon / t, out)
        row = {"case": f"decompose: {name}"}
        for b, (t, rate, _) in res.items():
            row[b] = rate
        if len(res) == 2:
            row["max_diff"] = float(np.max(np.abs(res["cython"][2][3] - res["python"][2][3])))
            row["speedup"] = res["python"][0] / res["cython"][0]
        rows.append(row)
    return rows


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=20000)
    ap.add_argument("--horizon", type=int, default=1024)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    print(f"backends: {', '.join(kernels.available_backends())}; paths={args.paths} horizon={args.horizon}")
    print(f"{'case':44s} {'cython steps/s':>15s} {'python steps/s':>15s} {'speedup':>8s} {'max diff':>10s}")
    for r in bench(args.paths, args.horizon, args.repeat):
        print(f"{r['case']:44s} {r.get('cython', float('nan')):15.3e} {r.get('python', float('nan')):15.3e} "
              f"{r.get('speedup', float('nan')):8.2f} {r.get('max_diff', float('nan')):10.2e}")


if __name__ == "__main__":
    main()
