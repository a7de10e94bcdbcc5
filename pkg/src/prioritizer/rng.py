"""Counter-based random-number derivation for stochastic forward passes.

Dropout masks must be bitwise reproducible regardless of batch partitioning,
thread count, or call order, so no stateful generator is involved anywhere.
Every mask is a pure function of ``(global_seed, input_index, sample_index,
layer_ordinal)``.

The derivation below is part of the on-disk contract (scores produced under a
given seed must never change between releases) and is fixed forever:

* ``finalize64`` is the SplitMix64 finalizer::

      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9    (mod 2**64)
      z = (z ^ (z >> 27)) * 0x94D049BB133111EB    (mod 2**64)
      z =  z ^ (z >> 31)

* ``mix64(p0, .., pk)`` folds integers left to right::

      h = 0
      for p in (p0 .. pk):  h = finalize64((h + GOLDEN + p) mod 2**64)

* the uniform stream for a stream seed ``s`` is counter-based::

      u_i = (finalize64((s + (i + 1) * GOLDEN) mod 2**64) >> 11) * 2**-53

with ``GOLDEN = 0x9E3779B97F4A7C15``.  Each ``u_i`` is uniform on ``[0, 1)``
with 53-bit resolution; a dropout unit is kept when ``u_i < 1 - p``, so a rate
of 0 keeps every unit.
"""

from __future__ import annotations

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1
_MULT1 = 0xBF58476D1CE4E5B9
_MULT2 = 0x94D049BB133111EB


def finalize64(z: int) -> int:
    """SplitMix64 finalizer on a Python int, mod 2**64."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MULT1) & _MASK64
    z = ((z ^ (z >> 27)) * _MULT2) & _MASK64
    return z ^ (z >> 31)


def mix64(*parts: int) -> int:
    """Fold integer coordinates into a single 64-bit stream seed."""
    h = 0
    for p in parts:
        h = finalize64((h + GOLDEN + (p & _MASK64)) & _MASK64)
    return h


def uniform_stream(seed: int, n: int) -> np.ndarray:
    """The first ``n`` uniforms in ``[0, 1)`` of the stream for ``seed``.

    Vectorized counterpart of ``finalize64``; uint64 arithmetic wraps mod 2**64.
    """
    counters = np.arange(1, n + 1, dtype=np.uint64)
    z = np.uint64(seed & _MASK64) + counters * np.uint64(GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MULT1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MULT2)
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53
