"""Row-parallel execution with a PRT_THREADS worker cap.

Per-pixel seeding makes results independent of scheduling, so worker count
only affects wall time, never output bytes.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def resolve_workers(parallelism: int | None = None) -> int:
    cap = os.environ.get("PRT_THREADS")
    if parallelism is None:
        parallelism = int(cap) if cap else (os.cpu_count() or 1)
    elif cap:
        parallelism = min(parallelism, int(cap))
    return max(1, parallelism)


def run_rows(fn, height: int, parallelism: int | None = None) -> None:
    """Call fn(y) for every row, possibly from multiple threads."""
    workers = resolve_workers(parallelism)
    if workers == 1:
        for y in range(height):
            fn(y)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(fn, range(height)))
