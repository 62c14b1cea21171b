"""Ordered thread-pool map used by the numerical drivers."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Sequence

ENV_THREADS = "LKCURV_THREADS"


def thread_count(threads: Optional[int] = None) -> int:
    if threads is None:
        threads = int(os.environ.get(ENV_THREADS, "1") or 1)
    return max(1, int(threads))


def make_runner(threads: Optional[int] = None) -> Optional[Callable]:
    """A ``runner(fn, jobs)`` returning results in job order, or None for serial."""
    n = thread_count(threads)
    if n == 1:
        return None

    def run(fn: Callable, jobs: Sequence):
        with ThreadPoolExecutor(max_workers=n) as pool:
            return list(pool.map(fn, jobs))

    return run
