"""Bounded worker pool for independent per-sample computations.

Sample points are independent, so checks that loop over them can fan the work
out to threads. Results always come back in input order, which keeps reports
deterministic regardless of the worker count.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from functools import partial
from typing import TypeVar

import anyio
import anyio.to_thread

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


async def amap_samples(
    fn: Callable[[T], R],
    items: Sequence[T],
    workers: int,
) -> list[R]:
    """Apply ``fn`` to every item on at most ``workers`` threads.

    Args:
        fn: Synchronous function of one item.
        items: Inputs.
        workers: Maximum number of concurrent threads.

    Returns:
        Results in the order of ``items``.

    Raises:
        Exception: The first failure in input order, after every item has run.
    """
    limiter = anyio.CapacityLimiter(max(1, workers))
    results: list[R | None] = [None] * len(items)
    failures: list[BaseException | None] = [None] * len(items)

    async def run_one(index: int, item: T) -> None:
        try:
            results[index] = await anyio.to_thread.run_sync(partial(fn, item), limiter=limiter)
        except Exception as exc:
            failures[index] = exc

    async with anyio.create_task_group() as tg:
        for index, item in enumerate(items):
            tg.start_soon(run_one, index, item)

    for failure in failures:
        if failure is not None:
            raise failure
    return results  # type: ignore[return-value]


def map_samples(fn: Callable[[T], R], items: Sequence[T], workers: int = 1) -> list[R]:
    """Synchronous entry point for :func:`amap_samples`.

    With one worker the items are processed inline without an event loop.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    logger.debug("Mapping %d samples over %d workers", len(items), workers)
    return anyio.run(amap_samples, fn, items, workers)
