"""NumPy fallback for the path kernels, vectorised across paths.

Both functions fill caller-provided output arrays exactly like the compiled
versions in ``_kernel.pyx``; see ``kernels.py`` for the argument layout.
"""

from __future__ import annotations

import numpy as np


def simulate(cone, form, law, starts, keys, checkpoints, tau_out, pos_out, max_out):
    n = len(keys)
    d = cone.dimension
    horizon = int(checkpoints[-1])
    x = np.array(np.broadcast_to(starts, (n, d)), dtype=float)
    m2 = np.sum(x * x, axis=1)
    tau_out[:] = horizon + 1
    active = np.arange(n)
    cp = list(int(c) for c in checkpoints)
    ci = 0
    while ci < len(cp) and cp[ci] == 0:
        pos_out[:, ci, :] = x
        max_out[:, ci] = np.sqrt(m2)
        ci += 1
    for t in range(1, horizon + 1):
        if active.size == 0:
            break
        x[active] += law.steps(keys[active], t)
        xa = x[active]
        m2[active] = np.maximum(m2[active], np.sum(xa * xa, axis=1))
        out = ~cone._contains(xa)
        if out.any():
            dead = active[out]
            tau_out[dead] = t
            for c in range(ci, len(cp)):
                pos_out[dead, c, :] = x[dead]
                max_out[dead, c] = np.sqrt(m2[dead])
            active = active[~out]
        if ci < len(cp) and t == cp[ci]:
            pos_out[active, ci, :] = x[active]
            max_out[active, ci] = np.sqrt(m2[active])
            ci += 1


def decompose(cone, form, law, start, keys, shifts, checkpoints,
              w1_out, w2_out, w3_out, lhs_out, tau_out):
    n = len(keys)
    kmax = int(checkpoints[-1])
    y = np.tile(np.asarray(start, dtype=float), (n, 1))
    u0 = float(form.values((start + shifts[0])[None, :])[0])
    prev = np.full(n, u0)
    w1 = np.zeros(n)
    w2 = np.zeros(n)
    w3 = np.zeros(n)
    tau_out[:] = kmax + 1
    active = np.arange(n)
    cp = list(int(c) for c in checkpoints)
    ci = 0
    while ci < len(cp) and cp[ci] == 0:
        w1_out[:, ci] = 0.0
        w2_out[:, ci] = 0.0
        w3_out[:, ci] = 0.0
        lhs_out[:, ci] = u0
        ci += 1
    for l in range(1, kmax + 1):
        if active.size == 0:
            break
        y[active] += law.steps(keys[active], l)
        ya = y[active]
        b = form.values(ya + shifts[l - 1])
        a = form.values(ya + shifts[l])
        w2[active] += a - b
        w3[active] += b - prev[active]
        prev[active] = a
        out = ~cone._contains(ya)
        if out.any():
            dead = active[out]
            w1[dead] = a[out]
            tau_out[dead] = l
            for c in range(ci, len(cp)):
                w1_out[dead, c] = w1[dead]
                w2_out[dead, c] = w2[dead]
                w3_out[dead, c] = w3[dead]
                lhs_out[dead, c] = 0.0
            active = active[~out]
            a = a[~out]
        if ci < len(cp) and l == cp[ci]:
            w1_out[active, ci] = 0.0
            w2_out[active, ci] = w2[active]
            w3_out[active, ci] = w3[active]
            lhs_out[active, ci] = a
            ci += 1
