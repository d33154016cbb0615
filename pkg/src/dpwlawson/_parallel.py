"""Worker pool for embarrassingly parallel per-sample work.

The pool size is capped by the DPW_THREADS environment variable; results
are collected in input order so outputs stay deterministic regardless of
scheduling.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    """1 unless DPW_THREADS asks for a pool (the per-sample tasks are small
    enough that threads only pay off on machines with many cores)."""
    cap = os.environ.get("DPW_THREADS")
    if cap is None:
        return 1
    try:
        return max(1, min(os.cpu_count() or 1, int(cap)))
    except ValueError:
        return 1


def ordered_map(fn, items):
    """Map preserving order; sequential when the pool has a single worker."""
    items = list(items)
    n = worker_count()
    if n <= 1 or len(items) <= 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
