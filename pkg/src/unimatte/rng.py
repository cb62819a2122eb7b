"""SplitMix64 generator used for deterministic weight init and augmentation.

The stream for a seed is defined by the reference SplitMix64 recurrence,
so the n-th output can be computed directly from the counter. That makes
bulk draws vectorizable while staying bit-identical to the scalar loop.
"""
import zlib

import numpy as np

GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


def _mix(z):
    """SplitMix64 finalizer on a uint64 array (wrapping arithmetic)."""
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def mix64(value: int) -> int:
    """Scalar SplitMix64 finalizer, handy for deriving sub-seeds."""
    z = value & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, label: str) -> int:
    """Independent sub-stream seed for ``label`` under ``seed``."""
    return mix64((seed & _MASK64) ^ (zlib.crc32(label.encode("utf-8")) * GOLDEN_GAMMA))


class Rng:
    """Counter-based SplitMix64 stream.

    ``Rng(seed).next_u64()`` reproduces the textbook SplitMix64 sequence;
    ``uint64(n)`` returns the next ``n`` outputs at once.
    """

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        self._counter = 0

    def uint64(self, n: int) -> np.ndarray:
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            state = np.uint64(self.seed) + idx * np.uint64(GOLDEN_GAMMA)
            return _mix(state)

    def next_u64(self) -> int:
        return int(self.uint64(1)[0])

    def random(self, n: int) -> np.ndarray:
        """Uniform float32 in [0, 1) from the top 24 bits (exact in float32)."""
        bits = self.uint64(n) >> np.uint64(40)
        return (bits.astype(np.float32) * np.float32(2.0 ** -24)).astype(np.float32)

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        n = int(np.prod(shape)) if shape else 1
        u = self.random(n).astype(np.float64)
        return (low + (high - low) * u).astype(np.float32).reshape(shape)

    def randint(self, low: int, high: int) -> int:
        """Integer in [low, high). Uses multiply-shift, no modulo bias worth caring about."""
        if high <= low:
            raise ValueError(f"empty range [{low}, {high})")
        span = high - low
        return low + (self.next_u64() * span >> 64)

    def permutation(self, n: int) -> list[int]:
        items = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.randint(0, i + 1)
            items[i], items[j] = items[j], items[i]
        return items
