"""Seeded, portable pseudo-random primitives.

Sampling plans must be bit-reproducible across runs and machines, so the
sampling and shuffling code is built on an explicit xoshiro256** generator
seeded through splitmix64, rather than on library RNG internals that may
change between versions. Both algorithms are small, public-domain designs;
they are transcribed here so the byte stream is pinned by this repository.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(text: str) -> int:
    """64-bit FNV-1a hash of a UTF-8 string."""
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state once; returns (new_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def derive_seed(seed: int, label: str) -> int:
    """Mix a run seed with a string label into an independent stream seed.

    Used to give every raster (and every pipeline stage) its own
    deterministic sub-stream, so per-raster work can run in parallel
    without sharing generator state.
    """
    state = (seed ^ fnv1a64(label)) & _MASK64
    state, _ = splitmix64(state)
    _, out = splitmix64(state)
    return out


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256StarStar:
    """xoshiro256** generator; state expanded from a 64-bit seed via splitmix64."""

    __slots__ = ("_s0", "_s1", "_s2", "_s3")

    def __init__(self, seed: int):
        state = seed & _MASK64
        state, self._s0 = splitmix64(state)
        state, self._s1 = splitmix64(state)
        state, self._s2 = splitmix64(state)
        _, self._s3 = splitmix64(state)

    @classmethod
    def from_state(cls, s0: int, s1: int, s2: int, s3: int) -> "Xoshiro256StarStar":
        """Bypass seeding; the four words must not all be zero."""
        if not any((s0, s1, s2, s3)):
            raise ValueError("all-zero state is a fixed point")
        gen = cls(0)
        gen._s0, gen._s1, gen._s2, gen._s3 = (
            s0 & _MASK64, s1 & _MASK64, s2 & _MASK64, s3 & _MASK64,
        )
        return gen

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, _rotl(s3, 45)
        return result

    def random(self) -> float:
        """Uniform double in [0, 1), 53 random bits."""
        return (self.next_u64() >> 11) * 1.1102230246251565e-16  # 2**-53

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n) via rejection on the top of the range."""
        if n <= 0:
            raise ValueError("randbelow() requires n >= 1")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]
