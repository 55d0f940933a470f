"""Counter-style random streams and block-parallel replication.

A stream is identified by ``(master_seed, stream_index)``.  Replications
are grouped into fixed-size blocks and block ``j`` always draws from
stream ``j``, so results do not depend on how many workers run the
blocks or in which order they finish.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

BLOCK_SIZE = 4096
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_index: int

    def __post_init__(self):
        for v in (self.master_seed, self.stream_index):
            if not 0 <= int(v) <= _MASK64:
                raise ValueError(f"{v} is not an unsigned 64-bit integer")

    def generator(self) -> np.random.Generator:
        # SeedSequence hashes the (seed, index) pair into PCG64 state
        ss = np.random.SeedSequence([int(self.master_seed), int(self.stream_index)])
        return np.random.Generator(np.random.PCG64(ss))


def worker_count(threads: int | None = None) -> int:
    """Resolve a worker count; ``EVIDENT_THREADS`` caps it, 0 means auto."""
    if threads is None:
        threads = int(os.environ.get("EVIDENT_THREADS", "0") or 0)
    if threads <= 0:
        threads = os.cpu_count() or 1
    return max(1, threads)


def blocks(reps: int, block_size: int = BLOCK_SIZE) -> list:
    """(block_index, size) pairs covering ``reps`` replications."""
    out = []
    for j, start in enumerate(range(0, reps, block_size)):
        out.append((j, min(block_size, reps - start)))
    return out


def run_blocks(fn: Callable[[np.random.Generator, int], object], reps: int, seed: int,
               threads: int | None = None, block_size: int = BLOCK_SIZE) -> list:
    """Apply ``fn(generator, n)`` to each block and return results in block order."""
    jobs = blocks(reps, block_size)
    n_workers = min(worker_count(threads), len(jobs)) if jobs else 1

    def one(job):
        j, n = job
        return fn(RngStream(seed, j).generator(), n)

    if n_workers == 1:
        return [one(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(one, jobs))
