"""Counter-based derivation of child seeds for parallel replications.

Every replication's generator is seeded from a pure 64-bit function of the
root seed and its indices, so results do not depend on how work is scheduled
across processes. The mixing function is the splitmix64 finalizer; the child
seed for indices (k1, k2, ..., km) is

    h = root mod 2^64
    for k in (k1, ..., km):  h = mix64(h XOR mix64(k mod 2^64))

with mix64(x) defined as

    x = (x + 0x9E3779B97F4A7C15) mod 2^64
    x = ((x XOR (x >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
    x = ((x XOR (x >> 27)) * 0x94D049BB133111EB) mod 2^64
    x = x XOR (x >> 31)
"""

from __future__ import annotations

_MASK = (1 << 64) - 1


def mix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def child_seed(root_seed: int, *indices: int) -> int:
    """Deterministic 64-bit seed for the replication at the given indices."""
    h = root_seed & _MASK
    for k in indices:
        h = mix64(h ^ mix64(k & _MASK))
    return h
