"""Seeded, splittable random streams.

Every stochastic stage of a session draws from its own child stream so that
changing one stage (say, adding an eavesdropper) never shifts the draws seen
by another. The generator is Philox, a counter-based bit generator whose
output depends only on the key, so sequences are identical across platforms.

Sparse per-pulse stages use :meth:`RandomStream.uniform_at` instead, which
maps ``(stream key, pulse index)`` straight to a uniform through the
SplitMix64 finalizer. A pulse's draw then does not depend on which other
pulses needed one, and stages that touch only the few pulses carrying photons
skip the rest.
"""
from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _key_words(*parts) -> list[int]:
    digest = hashlib.sha256(repr(parts).encode()).digest()
    return [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]


def derive_seed(*parts) -> int:
    """Hash arbitrary reprable parts into a 63-bit seed."""
    digest = hashlib.sha256(repr(parts).encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


class RandomStream:
    """Single-owner random stream keyed by a 64-bit seed.

    Parameters
    ----------
    seed : int
        Any integer; reduced modulo 2**64.
    path : tuple, optional
        Names of the child streams leading to this one. Two streams with the
        same seed and path produce the same draws.
    """

    def __init__(self, seed: int, path: tuple = ()):
        self.seed = int(seed) & _MASK64
        self.path = tuple(path)
        seq = np.random.SeedSequence(_key_words(self.seed, *self.path))
        self._gen = np.random.Generator(np.random.Philox(seq))
        self._key = np.uint64(derive_seed("at", self.seed, *self.path))

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, path={self.path!r})"

    def child(self, name) -> "RandomStream":
        """Independent stream for a named sub-task; does not advance ``self``."""
        return RandomStream(self.seed, self.path + (name,))

    def uniform(self, size=None):
        return self._gen.random(size)

    def integers(self, high, size=None):
        return self._gen.integers(0, high, size=size)

    def bits(self, size=None):
        """Fair bits as ``int8``, unpacked from raw bytes."""
        if size is None:
            return int(self.bits(1)[0])
        shape = (size,) if np.ndim(size) == 0 else tuple(size)
        count = int(np.prod(shape))
        raw = np.frombuffer(self._gen.bytes((count + 7) // 8), np.uint8)
        return np.unpackbits(raw)[:count].astype(np.int8).reshape(shape)

    def bernoulli_positions(self, n: int, p: float) -> np.ndarray:
        """Sorted indices of the successes among ``n`` independent Bernoulli(p) trials.

        Same law as ``flatnonzero(uniform(n) < p)`` at a cost proportional to
        the number of successes.
        """
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {p!r}")
        k = int(self._gen.binomial(n, p))
        return np.sort(self._gen.choice(n, size=k, replace=False)) if k else np.zeros(0, np.int64)

    def choice_indices(self, n, k):
        """``k`` distinct indices out of ``range(n)``, uniformly."""
        return self._gen.choice(n, size=k, replace=False)

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def uniform_at(self, index):
        """Uniforms in ``(0, 1)`` addressed by non-negative integer ``index``.

        ``uniform_at(i)`` is a fixed function of the stream and ``i``; it does
        not advance the sequential generator.
        """
        idx = np.asarray(index)
        if idx.size and idx.min() < 0:
            raise ValueError("index must be non-negative")
        with np.errstate(over="ignore"):
            z = (idx.astype(np.uint64) + np.uint64(1)) * _GOLDEN + self._key
            z ^= z >> np.uint64(30)
            z *= _MIX1
            z ^= z >> np.uint64(27)
            z *= _MIX2
            z ^= z >> np.uint64(31)
        return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
