"""Seedable, portable random streams for noise injection.

The generator is SplitMix64: state advances by the 64-bit golden-ratio
constant and each output is the finalizer mix of the new state.  Because
the k-th state is ``seed + k * GOLDEN (mod 2^64)``, blocks of outputs can
be produced with vectorised uint64 arithmetic that is bit-identical to
the scalar path.

Per-channel streams are derived by XOR-ing the session seed with an
FNV-1a hash of the channel name, then mixing once, so channels never
share a sequence.  Gaussians use the plain (non-caching) Box-Muller
transform: every normal draw consumes exactly two uniforms.
"""

import math

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def _fnv1a(name: str) -> int:
    h = 0xCBF29CE484222325
    for b in name.encode("utf-8"):
        h = ((h ^ b) * 0x100000001B3) & _MASK
    return h


class NoiseStream:
    """One deterministic SplitMix64 stream, optionally channel-derived."""

    def __init__(self, seed: int, channel: str = ""):
        base = seed & _MASK
        if channel:
            base = _mix(base ^ _fnv1a(channel))
        self._s0 = base
        self._n = 0  # draws consumed so far

    def spawn(self, channel: str) -> "NoiseStream":
        """Independent child stream named by `channel`."""
        return NoiseStream(self._s0, channel)

    def next_u64(self) -> int:
        self._n += 1
        return _mix((self._s0 + self._n * _GOLDEN) & _MASK)

    def u01(self) -> float:
        """Uniform in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.u01()

    def gauss(self, sigma: float = 1.0) -> float:
        """Box-Muller normal draw; consumes two uniforms."""
        u1 = self.u01()
        u2 = self.u01()
        r = math.sqrt(-2.0 * math.log(1.0 - u1))
        return sigma * r * math.cos(2.0 * math.pi * u2)

    def _u01_block(self, m: int) -> np.ndarray:
        ks = np.arange(self._n + 1, self._n + m + 1, dtype=np.uint64)
        self._n += m
        with np.errstate(over="ignore"):
            z = np.uint64(self._s0) + ks * np.uint64(_GOLDEN)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            z = z ^ (z >> np.uint64(31))
        return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, n: int, sigma: float = 1.0) -> np.ndarray:
        """Vectorised normals, bit-identical to n sequential gauss() calls."""
        u = self._u01_block(2 * n)
        r = np.sqrt(-2.0 * np.log(1.0 - u[0::2]))
        return sigma * r * np.cos(2.0 * np.pi * u[1::2])

    def uniforms(self, n: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        return lo + (hi - lo) * self._u01_block(n)

    def shuffle_order(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n)."""
        return np.argsort(self.uniforms(n), kind="stable")
