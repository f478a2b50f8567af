"""Seeded uniform streams.

Streams are Philox (counter-based) generators keyed by the user seed. Stream
``index`` is the base stream jumped ahead ``index`` times, so sample ``k`` of a
multi-sample run is reproducible on its own from ``(seed, k)``.
"""

from __future__ import annotations

import numpy as np

MAX_SEED = 2**64 - 1


def stream(seed: int, index: int = 0) -> np.random.Generator:
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    if index < 0:
        raise ValueError("stream index must be nonnegative")
    bitgen = np.random.Philox(key=seed)
    if index:
        bitgen = bitgen.jumped(index)
    return np.random.Generator(bitgen)


class ScriptedUniforms:
    """Replays a fixed list of uniforms; for tests that pin individual draws."""

    def __init__(self, values):
        self._values = list(values)
        self.used = 0

    def random(self) -> float:
        if self.used >= len(self._values):
            raise IndexError("scripted uniform stream exhausted")
        y = self._values[self.used]
        self.used += 1
        return y
