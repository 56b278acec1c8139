import asyncio as aio
import logging
from typing import Callable, Sequence, TypeVar

from asgiref.sync import async_to_sync, sync_to_async

_T = TypeVar('_T')

logger = logging.getLogger(__name__)


async def gather_sync(calls: Sequence[Callable[[], _T]], jobs: int) -> list[_T]:
    """Run sync callables in worker threads, at most `jobs` at a time.

    Results keep the order of `calls`.
    """
    semaphore = aio.Semaphore(jobs)

    async def run(call: Callable[[], _T]) -> _T:
        async with semaphore:
            # each call owns its data, so no need to pin it to the main thread
            return await sync_to_async(call, thread_sensitive=False)()

    return list(await aio.gather(*(run(call) for call in calls)))


def fan_out(calls: Sequence[Callable[[], _T]], jobs: int = 1) -> list[_T]:
    """Provide a blocking fan-out of independent solves.

    Example:

            results = fan_out([lambda: solve(p) for p in problems], jobs=4)

    With `jobs` <= 1 (or a single call) the calls run serially in the caller's thread.
    """
    if jobs <= 1 or len(calls) <= 1:
        return [call() for call in calls]
    logger.debug('fanning out %d calls over %d workers', len(calls), jobs)
    return async_to_sync(gather_sync)(calls, jobs)
