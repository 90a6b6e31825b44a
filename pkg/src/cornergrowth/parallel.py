"""Replicate-parallel execution.

Kernels have the form ``kernel(start, stop, *args)`` and write the result of
replicate ``r`` into slot ``r`` of preallocated output arrays.  Replicate ``r``
always draws from stream ``r`` of the experiment seed, so the filled arrays are
identical whatever the thread count or chunk schedule.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

DEFAULT_CHUNK = 64


def map_replicates(kernel, count: int, *args, threads: int = 1, chunk: int = DEFAULT_CHUNK) -> None:
    spans = [(a, min(a + chunk, count)) for a in range(0, count, chunk)]
    if threads <= 1 or len(spans) == 1:
        for a, b in spans:
            kernel(a, b, *args)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for fut in [pool.submit(kernel, a, b, *args) for a, b in spans]:
            fut.result()
