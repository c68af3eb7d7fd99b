"""Seed derivation and a stateless, counter-based uniform generator.

Inclusion decisions for lattice cells must not depend on the order in which
cells are visited, so every draw is a pure function of ``(seed, key)``.
"""
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def splitmix64(z):
    """SplitMix64 finalizer applied elementwise to a uint64 array."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def hash_coords(seed, coords):
    """Keyed 64-bit hash of integer lattice coordinates.

    ``coords`` has shape ``(N, d)``; the result has shape ``(N,)`` and depends
    only on ``seed`` and each row, never on the row's position.
    """
    coords = np.asarray(coords, dtype=np.int64)
    if coords.ndim == 1:
        coords = coords[:, None]
    h = np.full(coords.shape[0], np.uint64(int(seed) & _MASK64), dtype=np.uint64)
    h = splitmix64(h)
    with np.errstate(over="ignore"):
        for j in range(coords.shape[1]):
            h = splitmix64(h + _GOLDEN + coords[:, j].view(np.uint64))
    return h


def uniforms_for(seed, coords):
    """Uniform variates in [0, 1) keyed on ``(seed, x)`` for each lattice point."""
    h = hash_coords(seed, coords)
    return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53


def derive_seed(base_seed, *keys):
    """64-bit child seed for ``(base_seed, *keys)``, e.g. one per replica."""
    ss = np.random.SeedSequence([int(base_seed) & _MASK64, *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def block_generator(seed, block):
    """Independent Philox stream for time block ``block`` of a path."""
    ss = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=(int(block),))
    return np.random.Generator(np.random.Philox(ss))
