"""Worker-thread pool for independent per-frequency / per-node evaluations.

Results always come back in input order, so any accumulation done by the
caller is deterministic regardless of the thread count.
"""

import os
from concurrent.futures import ThreadPoolExecutor

ENV_VAR = "STABMOR_NUM_THREADS"


def num_workers():
    value = os.environ.get(ENV_VAR, "").strip()
    if value:
        try:
            n = int(value)
        except ValueError:
            raise ValueError(f"{ENV_VAR} must be a positive integer, got {value!r}") from None
        if n < 1:
            raise ValueError(f"{ENV_VAR} must be a positive integer, got {n}")
        return n
    return os.cpu_count() or 1


def ordered_map(func, items, workers=None):
    """``list(map(func, items))``, possibly evaluated concurrently."""
    items = list(items)
    workers = num_workers() if workers is None else workers
    if workers <= 1 or len(items) < 2:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(func, items))
