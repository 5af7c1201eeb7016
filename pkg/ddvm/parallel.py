"""Worker pool sizing and seeded fan-out for independent sampling chains."""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

T = TypeVar("T")

THREADS_ENV = "DDVM_THREADS"


def worker_count(default: int = 0) -> int:
    """Number of worker threads, capped by DDVM_THREADS when it is set."""
    cpu = os.cpu_count() or 1
    limit = default if default > 0 else cpu
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            logger.warning(f"Ignoring non-integer {THREADS_ENV}={raw!r}")
        else:
            limit = min(limit, max(1, cap))
    return max(1, limit)


def spawn_rngs(rng: np.random.Generator, n: int) -> List[np.random.Generator]:
    """Independent child generators, one per chain."""
    seeds = rng.integers(0, 2**63 - 1, size=n, dtype=np.int64)
    return [np.random.default_rng(int(seed)) for seed in seeds]


def run_parallel(fn: Callable[..., T], jobs: Sequence[tuple]) -> List[T]:
    """Run fn(*job) for every job, preserving order of results."""
    if len(jobs) <= 1 or worker_count() == 1:
        return [fn(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=min(worker_count(), len(jobs))) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))
