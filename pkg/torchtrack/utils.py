import logging
import os

import numpy as np
import torch

logger = logging.getLogger(__name__)

__all__ = [
    "NUM_WORKERS_ENV",
    "get_num_workers",
    "splitmix64",
    "derive_seed",
    "seeded_generators",
    "seeded_init",
    "parallel_map",
]

NUM_WORKERS_ENV = "TORCHTRACK_NUM_WORKERS"

_MASK64 = (1 << 64) - 1


def get_num_workers(requested=None):
    """Worker count for data-parallel rollouts.

    An explicit ``requested`` value wins, then ``TORCHTRACK_NUM_WORKERS``, then 1.
    """
    if requested is not None:
        workers = int(requested)
    else:
        raw = os.getenv(NUM_WORKERS_ENV)
        try:
            workers = int(raw) if raw else 1
        except ValueError:
            logger.warning(f"ignoring non-integer {NUM_WORKERS_ENV}={raw!r}")
            workers = 1
    return max(1, workers)


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed, index):
    """Independent 63-bit seed for item ``index`` of a run seeded with ``master_seed``."""
    return splitmix64(splitmix64(int(master_seed) & _MASK64) ^ int(index)) >> 1


def seeded_generators(seed):
    """Return ``(numpy.random.Generator, torch.Generator)`` seeded from ``seed``."""
    rng = np.random.default_rng(int(seed))
    gen = torch.Generator()
    gen.manual_seed(int(seed) & ((1 << 63) - 1))
    return rng, gen


def seeded_init(seed, factory, *args, **kwargs):
    """Call ``factory`` with torch's global RNG seeded from ``seed``, restoring the RNG afterwards."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(int(seed) & ((1 << 63) - 1))
        return factory(*args, **kwargs)


def parallel_map(fn, items, num_workers=1):
    """Ordered map, in-process for one worker, process pool otherwise.

    Results come back in input order so outputs only depend on the inputs.
    """
    items = list(items)
    if num_workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=num_workers) as pool:
        return list(pool.map(fn, items))
