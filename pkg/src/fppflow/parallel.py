"""Deterministic fan-out of replicate chunks over worker processes."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence


def run_chunks(fn: Callable, chunks: Sequence, threads: int = 1) -> list:
    """Apply ``fn`` to every chunk; results come back in chunk order.

    Chunks carry their own replicate ids, so the worker count only changes
    scheduling, never the numbers.
    """
    if threads <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))
