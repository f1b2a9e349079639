"""Seeded permutation stream.

PCG64 raw 64-bit output (numpy's bit generator, whose raw stream is fixed
per seed) feeds Lemire's unbiased bounded-integer method and a
Durstenfeld/Fisher-Yates shuffle. Nothing here depends on numpy's
higher-level sampling routines, whose streams may change between releases.
"""

from __future__ import annotations

from numpy.random import PCG64

_MASK64 = (1 << 64) - 1


class PermutationStream:
    def __init__(self, seed: int):
        self.seed = int(seed)
        self._bits = PCG64(self.seed & _MASK64)

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)``."""
        if n <= 0:
            raise ValueError("n must be positive")
        threshold = (1 << 64) % n
        while True:
            m = int(self._bits.random_raw()) * n
            if (m & _MASK64) >= threshold:
                return m >> 64

    def permutation(self, n: int) -> list[int]:
        out = list(range(n))
        for k in range(n - 1, 0, -1):
            r = self.below(k + 1)
            out[k], out[r] = out[r], out[k]
        return out
