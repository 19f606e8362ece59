"""Module for the counter-based pseudo-random generator.

Every random draw in a run (weight init, subsets, shuffles, adversarial index
selection, PGD random starts) comes from this generator so results are
bit-identical across hosts and numpy versions. Values are produced by the
splitmix64 finalizer applied to a 64-bit counter, so a block of ``n`` values
is computed in one vectorized pass.
"""
import zlib
from typing import Union

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1

StreamKey = Union[int, str, float]


def _mix(z: np.ndarray) -> np.ndarray:
    """splitmix64 output function over a uint64 array (wrapping arithmetic)."""
    z = (z ^ (z >> np.uint64(30))) * _MUL1
    z = (z ^ (z >> np.uint64(27))) * _MUL2
    return z ^ (z >> np.uint64(31))


def _key_to_int(key: StreamKey) -> int:
    if isinstance(key, int) and not isinstance(key, bool):
        return key & _MASK64
    return zlib.crc32(repr(key).encode("utf-8"))


class CounterRng:
    """Deterministic stream of 64-bit values, split into independent substreams.

    Parameters
    ----------
    seed: int
        Any integer; reduced modulo 2**64.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & _MASK64
        self.counter = 0

    def spawn(self, *keys: StreamKey) -> "CounterRng":
        """Derive an independent generator for a named substream.

        The same seed and keys always yield the same substream, regardless of
        how much of the parent stream has been consumed.
        """
        state = np.array([self.seed], dtype=np.uint64)
        for key in keys:
            salted = np.array([_key_to_int(key)], dtype=np.uint64)
            state = _mix(state ^ _mix(salted + _GOLDEN))
        return CounterRng(int(state[0]))

    def next_uint64(self, n: int) -> np.ndarray:
        """Next ``n`` raw values."""
        counters = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        return _mix(np.uint64(self.seed) + counters * _GOLDEN)

    def random(self, n: int) -> np.ndarray:
        """``n`` floats uniform on [0, 1) with 53 bits of precision."""
        return (self.next_uint64(n) >> np.uint64(11)).astype(np.float64) * (2.0**-53)

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        """Floats uniform on [low, high) with the given shape."""
        size = int(np.prod(shape, dtype=np.int64))
        return (low + (high - low) * self.random(size)).reshape(shape)

    def below(self, bounds: np.ndarray) -> np.ndarray:
        """One integer in ``[0, bound)`` for each element of ``bounds``."""
        bounds = np.asarray(bounds, dtype=np.int64)
        draws = np.floor(self.random(bounds.size) * bounds).astype(np.int64)
        return np.minimum(draws, bounds - 1)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of ``range(n)``."""
        order = np.arange(n, dtype=np.int64)
        if n < 2:
            return order
        swaps = self.below(np.arange(n, 1, -1))
        for position, offset in zip(range(n - 1, 0, -1), swaps):
            order[position], order[offset] = order[offset], order[position]
        return order

    def choice(self, n: int, k: int) -> np.ndarray:
        """``k`` distinct indices from ``range(n)``, in draw order."""
        if not 0 <= k <= n:
            raise ValueError(f"cannot choose {k} of {n} without replacement")
        order = np.arange(n, dtype=np.int64)
        if k == 0:
            return order[:0]
        swaps = self.below(np.arange(n, n - k, -1)) + np.arange(k)
        for position, offset in enumerate(swaps):
            order[position], order[offset] = order[offset], order[position]
        return order[:k]
