"""SplitMix64 random stream.

Every random decision in the package (weight init, batch order, balancing,
splitting, corpus generation) draws from this generator so that a seed
fully determines a run. SplitMix64 is counter based, which lets bulk draws
be vectorised with numpy while staying identical to the scalar sequence.
"""
from __future__ import annotations

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GAMMA = 0x9E3779B97F4A7C15

# stream ids for Rng.derive
STREAM_INIT = 1
STREAM_BATCH = 2
STREAM_BALANCE = 3
STREAM_SPLIT = 4
STREAM_CORPUS = 5


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(0xBF58476D1CE4E5B9)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


class Rng:
    """64-bit SplitMix generator.

    >>> Rng(0).next_u64()
    16294208416658607535
    """

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    @classmethod
    def derive(cls, seed: int, stream: int) -> "Rng":
        """Independent sub-stream ``stream`` of a master seed."""
        return cls(mix64((int(seed) & MASK64) ^ mix64(stream * GAMMA)))

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & MASK64
        return mix64(self.state)

    def u64_array(self, n: int) -> np.ndarray:
        """The next ``n`` outputs as a uint64 array (same values as n calls to next_u64)."""
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            states = np.uint64(self.state) + steps * np.uint64(GAMMA)
            out = _mix64_array(states)
        self.state = (self.state + n * GAMMA) & MASK64
        return out

    def random(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def random_array(self, n: int) -> np.ndarray:
        return (self.u64_array(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def below(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def below_array(self, count: int, n: int) -> np.ndarray:
        """``count`` integers in [0, n) for small n (n <= 2**32).

        Uses the multiply-shift map on the top 32 bits; bias is below n / 2**32.
        """
        if not 0 < n <= 1 << 32:
            raise ValueError("n out of range")
        hi = self.u64_array(count) >> np.uint64(32)
        return ((hi * np.uint64(n)) >> np.uint64(32)).astype(np.int64)

    def normal_array(self, n: int) -> np.ndarray:
        """Standard normals via Box-Muller, consuming 2 * ceil(n / 2) draws."""
        pairs = (n + 1) // 2
        u = self.random_array(2 * pairs)
        u1 = 1.0 - u[0::2]  # (0, 1]
        u2 = u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        return z[:n]

    def shuffle(self, items: list) -> list:
        """Fisher-Yates shuffle, returning a new list."""
        out = list(items)
        for i in range(len(out) - 1, 0, -1):
            j = self.below(i + 1)
            out[i], out[j] = out[j], out[i]
        return out

    def sample_prefix(self, n: int, k: int) -> list[int]:
        """First ``k`` positions of a Fisher-Yates pass over range(n).

        Sampling without replacement; result order is the draw order.
        """
        idx = list(range(n))
        for i in range(min(k, n)):
            j = i + self.below(n - i)
            idx[i], idx[j] = idx[j], idx[i]
        return idx[:k]
