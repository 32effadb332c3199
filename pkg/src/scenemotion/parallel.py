"""Internal parallelism helpers.

The DEMOS_THREADS environment variable caps worker threads (0 = auto, i.e.
the CPU count). Work is pure and gathered in submission order, so results
are identical at any thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_cap() -> int:
    raw = os.environ.get("DEMOS_THREADS", "0").strip() or "0"
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"DEMOS_THREADS must be an integer, got {raw!r}") from None
    if cap < 0:
        raise ValueError("DEMOS_THREADS must be >= 0")
    if cap == 0:
        return os.cpu_count() or 1
    return cap


def parallel_map(fn, items):
    """Ordered map over items, threaded when the cap allows it."""
    items = list(items)
    cap = thread_cap()
    if cap <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(cap, len(items))) as pool:
        return list(pool.map(fn, items))
