"""Order-preserving parallel map over independent grid points."""

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count(threads=None) -> int:
    if threads is None:
        threads = int(os.environ.get("NVDNP_THREADS", "1"))
    if threads < 1:
        raise ValueError("thread count must be >= 1")
    return threads


def parallel_map(fn, items, threads=None):
    items = list(items)
    n = thread_count(threads)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
