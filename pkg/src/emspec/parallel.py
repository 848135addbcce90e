"""Order-preserving parallel map and seeded random sub-streams."""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from itertools import islice

import numpy as np

THREADS_ENV = "EMSPEC_THREADS"


def worker_count(threads: int | None = None) -> int:
    if threads is None:
        raw = os.environ.get(THREADS_ENV, "").strip()
        threads = int(raw) if raw else (os.cpu_count() or 1)
    return max(1, int(threads))


def ordered_map(fn, items, threads: int | None = None, chunk: int = 256):
    """Like ``map(fn, items)`` but spread over a thread pool.

    Results come back in input order, so output never depends on the worker
    count. Items are consumed in chunks to bound memory.
    """
    n = worker_count(threads)
    it = iter(items)
    if n == 1:
        yield from map(fn, it)
        return
    with ThreadPoolExecutor(max_workers=n) as pool:
        while True:
            batch = list(islice(it, chunk))
            if not batch:
                return
            yield from pool.map(fn, batch)


def substream(seed: int, name: str, *keys: int) -> np.random.Generator:
    """Independent generator for the named stream and integer keys.

    The same ``(seed, name, keys)`` always yields the same stream, whatever
    else has been drawn elsewhere.
    """
    if seed is None:
        raise ValueError("a seed is required")
    spawn_key = (zlib.crc32(name.encode("utf-8")), *(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=spawn_key)))


def date_key(date) -> int:
    """Non-negative integer key (proleptic ordinal) for per-date streams."""
    return np.datetime64(date, "D").astype(object).toordinal()
