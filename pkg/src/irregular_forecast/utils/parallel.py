"""Worker pool shared by entity pipelines and sweep cells."""

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

import structlog

from irregular_forecast.config import settings

T = TypeVar("T")
R = TypeVar("R")

logger = structlog.get_logger(__name__)


def resolve_jobs(jobs: Optional[int] = None) -> int:
    """Pick the worker count: explicit value, then settings, then logical cores."""
    if jobs is not None:
        return max(1, jobs)
    if settings.jobs is not None:
        return settings.jobs
    return os.cpu_count() or 1


def map_ordered(fn: Callable[[T], R], items: Iterable[T], jobs: Optional[int] = 1) -> List[R]:
    """Apply ``fn`` to every item, preserving input order in the result.

    With more than one job the work runs in a process pool; ``fn`` and the
    items must then be picklable.
    """
    work = list(items)
    workers = min(resolve_jobs(jobs), len(work)) if work else 1
    if workers <= 1:
        return [fn(item) for item in work]

    logger.debug("Dispatching to process pool", workers=workers, tasks=len(work))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, work))
