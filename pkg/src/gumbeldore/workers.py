"""Deterministic fan-out of per-instance work over a process pool.

Every payload carries everything it needs (including its own RNG stream
ids), and results are collected in payload order, so any worker count
produces identical output.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor


def parallel_map(fn, payloads, workers: int) -> list:
    payloads = list(payloads)
    if workers <= 1 or len(payloads) <= 1:
        return [fn(p) for p in payloads]
    chunk = max(1, math.ceil(len(payloads) / (workers * 4)))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, payloads, chunksize=chunk))
