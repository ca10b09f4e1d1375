"""Master-seed to per-component seed derivation.

Each component gets its own stream: ``derive_seed(master, "cards")`` and
``derive_seed(master, "bo", "step", 7)`` never collide in practice, so
changing one stage of a pipeline does not perturb the random numbers of
another.
"""

import hashlib

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _name_hash(name: str) -> int:
    return int.from_bytes(hashlib.blake2b(name.encode("utf-8"), digest_size=8).digest(), "little")


def derive_seed(master: int, *path) -> int:
    """Fold each path element into the master seed with splitmix64."""
    state = splitmix64(int(master) & _MASK)
    for part in path:
        state = splitmix64(state ^ _name_hash(str(part)))
    return state


def rng_for(master: int, *path) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *path))
