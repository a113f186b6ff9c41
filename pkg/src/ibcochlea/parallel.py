"""Shared-memory worker pool for the hot loops.

All parallel sections in this package follow one discipline: tasks read
shared arrays and write disjoint regions, so any worker count produces
bitwise-identical results. The pool is a thin wrapper that also gives a
serial fallback when threads == 1.
"""

import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "IBCOCHLEA_THREADS"


def resolve_threads(cli_value=None) -> int:
    """Thread count resolution: explicit argument wins over the environment."""
    if cli_value is not None:
        return max(1, int(cli_value))
    env = os.environ.get(ENV_THREADS)
    if env:
        return max(1, int(env))
    return 1


def chunk_ranges(n: int, parts: int):
    """Split range(n) into at most `parts` contiguous (lo, hi) spans."""
    parts = max(1, min(parts, n))
    bounds = [round(i * n / parts) for i in range(parts + 1)]
    return [(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]


class WorkerPool:
    """Fixed-size thread pool mapping tasks over argument lists.

    Workers are only worth their dispatch cost for array-sized tasks;
    callers fall back to inline execution for tiny work items.
    """

    def __init__(self, threads: int = 1):
        self.threads = max(1, int(threads))
        self._ex = ThreadPoolExecutor(self.threads) if self.threads > 1 else None

    def run(self, fn, args_list):
        """Apply fn to each item; returns results in input order."""
        if self._ex is None or len(args_list) <= 1:
            return [fn(a) for a in args_list]
        return list(self._ex.map(fn, args_list))

    def close(self):
        if self._ex is not None:
            self._ex.shutdown(wait=True)
            self._ex = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
