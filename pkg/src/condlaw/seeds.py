"""Deterministic seed derivation for parallel experiment streams.

Every work unit (a grid point, a sample chunk) owns an rng seeded by
`derive_seed(master_seed, worker_index, grid_point_index)`, so results
are independent of how units are scheduled across processes.

Mixing function, for ports to other languages: one splitmix64 step is

    state = (x + 0x9E3779B97F4B7B15) mod 2^64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) mod 2^64
    return z ^ (z >> 31)

and the derived seed is

    splitmix64(splitmix64(master_seed) XOR ((worker_index << 32) | grid_point_index))

Conformance value: derive_seed(42, 3, 7) == 5504024118666061669.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One output of the splitmix64 generator seeded at x."""
    state = (x + 0x9E3779B97F4B7B15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, worker_index: int, grid_point_index: int) -> int:
    """64-bit stream seed for one work unit.

    Injective in (worker_index, grid_point_index) for indices below
    2^32, since they are packed into disjoint halves of one word
    before the final bijective mix.
    """
    if worker_index < 0 or grid_point_index < 0:
        raise ValueError("indices must be nonnegative")
    packed = ((worker_index & 0xFFFFFFFF) << 32) | (grid_point_index & 0xFFFFFFFF)
    return splitmix64(splitmix64(master_seed & _MASK64) ^ packed)
