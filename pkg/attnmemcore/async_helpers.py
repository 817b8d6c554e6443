# Copyright 2025 The attnmem authors.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU Affero General Public License as
# published by the Free Software Foundation, either version 3 of the
# License, or (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU Affero General Public License for more details.
#
# You should have received a copy of the GNU Affero General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.

import asyncio
import concurrent.futures
import logging
import os


log = logging.getLogger("attnmemcore.async_helpers")


def default_workers():
    return len(os.sched_getaffinity(0)) if hasattr(
        os, 'sched_getaffinity') else (os.cpu_count() or 1)


async def run_in_executor(executor, func, *args):
    loop = asyncio.get_running_loop()
    return await loop.run_in_executor(executor, func, *args)


def map_in_pool(func, items, workers=None):
    """Apply func to every item on a thread pool, preserving item order.

    Results come back in the order of items regardless of completion
    order. workers=1 runs inline.
    """
    items = list(items)
    if workers is None:
        workers = default_workers()
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    async def _gather(executor):
        return await asyncio.gather(*[
            run_in_executor(executor, func, item) for item in items])

    log.debug("dispatching %d items on %d workers", len(items), workers)
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as ex:
        loop = asyncio.new_event_loop()
        try:
            return loop.run_until_complete(_gather(ex))
        finally:
            loop.close()
