"""Seedable, splittable randomness.

Every randomized operation in this package draws from a named child stream of
a single 64-bit seed, so that each algorithm invocation is reproducible in
isolation: identical (seed, label, indices) always yields the identical
stream, on every platform, regardless of what else ran before.
"""

import hashlib

import numpy as np

__all__ = ["RandomSource", "as_source"]


def _label_words(label):
    # Stable 2x32-bit digest of the label; python's hash() is salted per run.
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return (
        int.from_bytes(digest[:4], "big"),
        int.from_bytes(digest[4:8], "big"),
    )


class RandomSource:
    """A 64-bit seed from which named, indexed child generators are derived."""

    def __init__(self, seed):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF

    def stream(self, label, *indices):
        """Return a fresh ``numpy.random.Generator`` for (label, indices)."""
        key = _label_words(label) + tuple(int(i) & 0xFFFFFFFF for i in indices)
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=key)
        return np.random.Generator(np.random.PCG64(seq))

    def child(self, label, *indices):
        """Derive a child source, e.g. one per retry attempt."""
        g = self.stream(label, *indices)
        return RandomSource(int(g.integers(0, 2**63)))

    def __repr__(self):
        return f"RandomSource(seed={self.seed})"


def as_source(rng):
    """Coerce an int seed / RandomSource into a RandomSource."""
    if isinstance(rng, RandomSource):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RandomSource(rng)
    raise TypeError(f"expected seed or RandomSource, got {type(rng).__name__}")
