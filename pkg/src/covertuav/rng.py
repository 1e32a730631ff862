"""Seedable random number streams.

All randomness in the package flows through Philox counter-based generators
(`numpy.random.Philox`). Philox is stateless-per-key, so a (seed, stream)
pair fully determines the sequence: the same seed reproduces the same draws
on any machine, and parallel workers get independent streams by XOR-ing the
worker index into the key.
"""

import numpy as np

__all__ = ["make_rng", "worker_seed"]


def worker_seed(base_seed: int, worker: int = 0) -> int:
    """Derive the key for worker `worker` from a base seed (base XOR index)."""
    if base_seed < 0:
        raise ValueError("base_seed must be non-negative")
    if worker < 0:
        raise ValueError("worker must be non-negative")
    return int(base_seed) ^ int(worker)


def make_rng(seed: int, worker: int = 0) -> np.random.Generator:
    """Return a Philox-backed Generator for (seed, worker)."""
    return np.random.Generator(np.random.Philox(key=worker_seed(seed, worker)))
