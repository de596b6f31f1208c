"""Deterministic process-pool map: results ordered by input index."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


def parallel_map(fn, items, jobs: int = 1) -> list:
    """Map ``fn`` over ``items``; identical output for any ``jobs`` value.

    ``fn`` and the items must be picklable when jobs > 1.
    """
    items = list(items)
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    chunk = max(1, len(items) // (jobs * 8))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=chunk))
