"""Deterministic fan-out over replication indices.

Because every replication derives its randomness from its own keyed stream,
results are a pure function of the index; running chunks in worker processes
changes wall-clock time but never the output.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from functools import partial


def _run_chunk(fn, lo: int, hi: int) -> list:
    return [fn(i) for i in range(lo, hi)]


def map_indices(fn, n: int, workers: int = 1) -> list:
    """Apply fn to 0..n-1 in index order; fn must be picklable when workers > 1."""
    if workers <= 1 or n < 2:
        return [fn(i) for i in range(n)]
    bounds = [(n * j) // (workers * 4) for j in range(workers * 4 + 1)]
    chunks = [(lo, hi) for lo, hi in zip(bounds, bounds[1:]) if hi > lo]
    out: list = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(partial(_chunk_call, fn), chunks):
            out.extend(part)
    return out


def _chunk_call(fn, bounds: tuple[int, int]) -> list:
    return _run_chunk(fn, *bounds)
