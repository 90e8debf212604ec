"""Deterministic worker-pool map.

Tasks must be pure functions of their argument; results are returned in input
order, so serial and parallel runs produce bit-identical output.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

from .errors import InvalidInputError


def pmap(fn, items, threads: int = 1) -> list:
    """Map ``fn`` over ``items`` with at most ``threads`` workers."""
    if threads is None:
        threads = 1
    threads = int(threads)
    if threads < 1:
        raise InvalidInputError("threads must be a positive integer")
    items = list(items)
    if threads == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
