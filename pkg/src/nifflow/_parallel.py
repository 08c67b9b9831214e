"""Deterministic fan-out helper for independent estimator tasks."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


def parallel_map(fn, items, threads: int = 1) -> list:
    """Apply ``fn`` to every item, optionally on a thread pool.

    Results come back in input order regardless of scheduling, so callers are
    schedule-independent by construction.
    """
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
