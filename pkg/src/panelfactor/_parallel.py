"""Worker-count resolution and an order-preserving parallel map."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "PANELFACTOR_THREADS"


def resolve_workers(workers: int | None = None) -> int:
    """0 or None means: environment variable, else all cores."""
    if workers is None or workers == 0:
        env = os.environ.get(ENV_THREADS, "").strip()
        if env:
            try:
                workers = int(env)
            except ValueError:
                workers = 0
        if not workers:
            workers = os.cpu_count() or 1
    if workers < 0:
        raise ValueError("worker count must be non-negative")
    return int(workers)


def pmap(fn, items, workers: int | None = 1) -> list:
    """``[fn(x) for x in items]``, possibly on threads; result order is fixed.

    Work is split by the caller into items that do not depend on the worker
    count, so the output is identical whatever ``workers`` is.
    """
    items = list(items)
    workers = resolve_workers(workers)
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
