"""Seed derivation and replication-parallel map.

Replication ``i`` of an experiment seeded with ``base`` always draws from
``SeedSequence([base, stream, i])``, so results do not depend on how
replications are scheduled across threads.
"""

from concurrent.futures import ThreadPoolExecutor
import os

import numpy as np

SEED_MASK = (1 << 64) - 1


def as_rng(seed):
    """Return a Generator for an int, SeedSequence, Generator or None."""
    return np.random.default_rng(seed)


def rep_rng(base_seed, i, stream=0):
    return np.random.default_rng(np.random.SeedSequence([int(base_seed) & SEED_MASK, stream, i]))


def default_threads():
    return os.cpu_count() or 1


def map_reps(fn, n_reps, base_seed, stream=0, threads=1, chunk=64):
    """Evaluate ``fn(i, rng)`` for every replication, in replication order.

    Work is cut into fixed-size chunks so the per-replication streams and the
    returned order are identical for any ``threads`` value.
    """
    def run(start):
        stop = min(start + chunk, n_reps)
        return [fn(i, rep_rng(base_seed, i, stream)) for i in range(start, stop)]

    starts = range(0, n_reps, chunk)
    if threads <= 1 or n_reps <= chunk:
        parts = [run(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, starts))
    return [x for part in parts for x in part]
