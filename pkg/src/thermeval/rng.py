"""Portable deterministic random draws for the mock detector.

The generator choice and draw order are an external contract (documented in
docs/FORMATS.md) so that seeded runs are reproducible across implementations:

* stream seed = FNV-1a 64 over ``global_seed`` (8 bytes little-endian) ++
  ``image_id`` utf-8 ++ 0x1F ++ ``view_id`` utf-8
* generator = SplitMix64
* unit uniform = (next_u64 >> 11) * 2**-53, in [0, 1)
* standard normal = Box-Muller cosine branch, consuming two uniforms
* Poisson = Knuth product-of-uniforms, consuming a variable number of draws
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def derive_stream_seed(global_seed: int, image_id: str, view_id: str) -> int:
    """Stable 64-bit seed for the (image, view) draw stream."""
    payload = (
        (global_seed & _MASK64).to_bytes(8, "little")
        + image_id.encode("utf-8")
        + b"\x1f"
        + view_id.encode("utf-8")
    )
    return fnv1a64(payload)


class SplitMix64:
    """SplitMix64 with the draw helpers the mock detector contract names."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform float in [0, 1)."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform_in(self, lo: float, hi: float) -> float:
        return lo + self.uniform() * (hi - lo)

    def normal(self) -> float:
        """Standard normal via Box-Muller; always consumes two uniforms."""
        u = self.uniform()
        v = self.uniform()
        return math.sqrt(-2.0 * math.log(1.0 - u)) * math.cos(2.0 * math.pi * v)

    def poisson(self, rate: float) -> int:
        """Knuth's method; consumes at least one uniform even at rate 0."""
        limit = math.exp(-rate)
        k = 0
        p = 1.0
        while True:
            k += 1
            p *= self.uniform()
            if p <= limit:
                return k - 1
