"""Deterministic chunked reductions for O(N^2) pair sums.

Pair sums are split into fixed row chunks whose size depends only on the
problem size, never on the worker count.  Chunk partials are computed
independently (optionally on a thread pool) and combined strictly in chunk
order, so any thread count produces bit-identical results.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

# Keep per-chunk Gram blocks around 4e6 entries (~32 MB).
_TARGET_CHUNK_ENTRIES = 4_000_000


def chunk_rows(num_rows, num_cols):
    """Fixed chunk height for a num_rows x num_cols pair table."""
    if num_cols <= 0:
        return max(1, num_rows)
    rows = _TARGET_CHUNK_ENTRIES // num_cols
    return int(min(max(rows, 1), max(num_rows, 1)))


def ordered_chunk_sum(worker, num_rows, num_cols, threads=1):
    """Sum worker(start, stop) over row chunks, reducing in chunk order.

    ``worker`` must return a float or a 1-d array of accumulators; results
    are added in ascending chunk order regardless of completion order.
    """
    step = chunk_rows(num_rows, num_cols)
    spans = [(s, min(s + step, num_rows)) for s in range(0, num_rows, step)]
    if not spans:
        return 0.0
    if threads <= 1 or len(spans) == 1:
        partials = [worker(a, b) for a, b in spans]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(lambda ab: worker(*ab), spans))
    total = partials[0]
    if np.ndim(total) == 0:
        total = float(total)
        for part in partials[1:]:
            total += float(part)
        return total
    total = np.array(partials[0], dtype=float, copy=True)
    for part in partials[1:]:
        total += part
    return total
