"""Counter-based random streams.

Every sample path owns a key derived from ``(seed, stream_id, sample_index)``;
its ``j``-th 64-bit draw is ``mix64(key + (j + 1) * GOLDEN)`` (SplitMix64 in
counter form). Draws therefore never depend on how paths are scheduled over
threads or chunks. The compiled kernel implements the same functions; the
vectorised versions here back the pure-Python kernel and the tests.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
STREAM_MUL = np.uint64(0xD1B54A32D192ED03)
MASK64 = (1 << 64) - 1
TWO_M53 = 2.0 ** -53


def mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finaliser on a uint64 array (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * MIX1
    z = (z ^ (z >> np.uint64(27))) * MIX2
    return z ^ (z >> np.uint64(31))


def mix64_int(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, stream_id: int) -> int:
    """Key shared by all samples of one stream."""
    k = mix64_int((seed & MASK64) + 0x9E3779B97F4A7C15)
    return mix64_int(k ^ ((stream_id * 0xD1B54A32D192ED03) & MASK64))


def path_keys(seed: int, stream_id: int, index0: int, count: int) -> np.ndarray:
    """Per-path keys for sample indices ``index0 .. index0 + count - 1``."""
    base = np.uint64(stream_key(seed, stream_id))
    idx = np.arange(index0, index0 + count, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(base + idx * GOLDEN)


def draw(keys: np.ndarray, counter: int) -> np.ndarray:
    """The ``counter``-th 64-bit draw of each path key."""
    with np.errstate(over="ignore"):
        return mix64(keys + np.uint64((counter + 1) & MASK64) * GOLDEN)


def to_unit(bits: np.ndarray) -> np.ndarray:
    """Uniform in (0, 1]: never zero, so logs and negative powers are safe."""
    return ((bits >> np.uint64(11)).astype(np.float64) + 1.0) * TWO_M53


def child_seed(seed: int, label: int) -> int:
    """Deterministic sub-seed for nested estimators (outer stream -> child streams)."""
    return mix64_int(stream_key(seed, label) ^ 0x5851F42D4C957F2D)
