"""Deterministic chunked execution.

Work is split into fixed-size chunks that do not depend on the thread count,
each chunk is computed independently, and results are combined in chunk-index
order.  Outputs are therefore bit-identical for any --threads value.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


def chunk_ranges(n_items: int, chunk_size: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + chunk_size, n_items))
            for lo in range(0, n_items, chunk_size)]


def run_chunked(fn, n_items: int, chunk_size: int, threads: int = 1) -> list:
    """Apply ``fn(lo, hi)`` to every chunk; return results in chunk order."""
    ranges = chunk_ranges(n_items, chunk_size)
    if threads <= 1 or len(ranges) <= 1:
        return [fn(lo, hi) for lo, hi in ranges]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn, lo, hi) for lo, hi in ranges]
        return [f.result() for f in futures]


def run_indexed(fn, n_items: int, threads: int = 1) -> list:
    """Apply ``fn(i)`` for i in range(n_items); return results in index order."""
    if threads <= 1 or n_items <= 1:
        return [fn(i) for i in range(n_items)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn, i) for i in range(n_items)]
        return [f.result() for f in futures]
