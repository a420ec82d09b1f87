import math
import os
import subprocess
import sys

import numpy as np
import pytest

from conewalk import kernels
from conewalk.cones import Cone
from conewalk.harmonic import HarmonicForm
from conewalk.laws import IncrementLaw, LawKind
from conewalk.vfunc import ShiftSequence

needs_both = pytest.mark.skipif(len(kernels.available_backends()) < 2, reason="compiled kernel not built")

CASES = [
    (Cone.half_line(), LawKind.RADEMACHER, [3.0]),
    (Cone.orthant(3), LawKind.RADEMACHER, [1.0, 2.0, 1.0]),
    (Cone.half_space(2), LawKind.GAUSSIAN, [0.3, 1.0]),
    (Cone.wedge(2 * math.pi / 3), LawKind.SPHERE, [0.2, 1.0]),
    (Cone.wedge(3 * math.pi / 2), LawKind.GAUSSIAN, [-1.0, 0.5]),
    (Cone.circular(math.pi / 3, 512), LawKind.GAUSSIAN, [0.1, 0.0, 1.0]),
    (Cone.half_line(), LawKind.PARETO, [2.0]),
]


def _tol(kind):
    # lattice laws are exact; continuous laws differ only by libm rounding
    return 0.0 if kind is LawKind.RADEMACHER else 1e-10


@needs_both
@pytest.mark.parametrize("cone, kind, x", CASES)
def test_simulate_parity(cone, kind, x):
    form = HarmonicForm(cone)
    law = IncrementLaw(kind, cone.dimension, 4.0) if kind is LawKind.PARETO else IncrementLaw(kind, cone.dimension)
    keys = kernels.keys_for(3, 0, 0, 3000)
    a = kernels.simulate_block(form, law, np.asarray(x), keys, [0, 5, 50, 300], backend="cython")
    b = kernels.simulate_block(form, law, np.asarray(x), keys, [0, 5, 50, 300], backend="python")
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_allclose(a[1], b[1], atol=_tol(kind))
    np.testing.assert_allclose(a[2], b[2], atol=_tol(kind))


@needs_both
@pytest.mark.parametrize("cone, kind, x", CASES[:6])
def test_decompose_parity(cone, kind, x):
    form = HarmonicForm(cone)
    law = IncrementLaw(kind, cone.dimension)
    keys = kernels.keys_for(4, 0, 0, 2000)
    shifts = ShiftSequence.for_cone(form).table(200)
    a = kernels.decompose_block(form, law, np.asarray(x), keys, shifts, [1, 20, 200], backend="cython")
    b = kernels.decompose_block(form, law, np.asarray(x), keys, shifts, [1, 20, 200], backend="python")
    np.testing.assert_array_equal(a[4], b[4])
    for u, v in zip(a[:4], b[:4]):
        np.testing.assert_allclose(u, v, atol=1e-10 * max(1.0, float(np.max(np.abs(v)))) if _tol(kind) else 1e-12)


def test_checkpoint_validation(backend):
    form = HarmonicForm(Cone.half_line())
    law = IncrementLaw(LawKind.RADEMACHER, 1)
    keys = kernels.keys_for(0, 0, 0, 4)
    with pytest.raises(ValueError):
        kernels.simulate_block(form, law, np.array([1.0]), keys, [5, 3], backend=backend)
    with pytest.raises(ValueError):
        kernels.simulate_block(form, law, np.array([1.0, 1.0]), keys, [5], backend=backend)


def test_chunking_is_order_stable():
    out = kernels.map_chunks(lambda i0, c: (i0, c), 40_000, threads=3, chunk=16384)
    assert out == [(0, 16384), (16384, 16384), (32768, 40_000 - 32768)]


def test_environment_forces_fallback():
    code = "from conewalk import kernels; print(kernels.default_backend())"
    env = dict(os.environ, CONEWALK_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env)
    assert out.stdout.strip() == "python"
