"""Deterministic random streams and the replica worker pool.

Every replica draws from its own PCG64 stream keyed by
``(master_seed, *purpose, replica_index)``, so results never depend on how
replicas are scheduled across threads.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

RandomStream = np.random.Generator

MAX_SEED = 2**64 - 1


def stream(master_seed: int, *key: int) -> RandomStream:
    if not 0 <= int(master_seed) <= MAX_SEED:
        raise ValueError(f"master seed must fit in 64 bits, got {master_seed}")
    seq = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(seq))


def default_threads() -> int:
    return max(1, os.cpu_count() or 1)


def map_replicas(
    work: Callable[[RandomStream, object], float],
    replicas: int,
    master_seed: int,
    key: Sequence[int] = (),
    threads: int = 1,
    make_scratch: Callable[[], object] = lambda: None,
    dtype=np.int64,
) -> np.ndarray:
    """Evaluate ``work(rng, scratch)`` for every replica index.

    ``work`` should release the GIL (numba ``nogil``) for threads to help.
    Each chunk of replicas gets one scratch object, reused across the chunk.
    """
    out = np.empty(replicas, dtype=dtype)
    key = tuple(key)

    def run_chunk(lo: int, hi: int) -> None:
        scratch = make_scratch()
        for i in range(lo, hi):
            out[i] = work(stream(master_seed, *key, i), scratch)

    threads = max(1, min(int(threads), replicas))
    if threads == 1:
        run_chunk(0, replicas)
        return out
    bounds = np.linspace(0, replicas, 4 * threads + 1).astype(int)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(run_chunk, lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        for fut in futures:
            fut.result()
    return out
