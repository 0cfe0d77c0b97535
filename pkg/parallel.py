"""
Ordered parallel map used by the expensive expansion loops
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor

logger = logging.getLogger(__name__)


def default_jobs():
    """Worker count from NAMBUFLOW_JOBS, else the number of CPUs"""
    value = os.environ.get("NAMBUFLOW_JOBS")
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            logger.warning("Ignoring NAMBUFLOW_JOBS=%r", value)
    return os.cpu_count() or 1


def ordered_map(fn, items, jobs=1, chunksize=1):
    """
    Apply fn to every item, results in input order.

    fn must be a module-level function so it pickles for worker processes.
    """
    items = list(items)
    if jobs is None:
        jobs = default_jobs()
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    workers = min(jobs, len(items))
    logger.debug("Mapping %s over %d items with %d workers", fn.__name__, len(items), workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))
