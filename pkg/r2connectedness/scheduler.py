""" Worker pool for independent fits (equations of one table, windows of a rolling run). """
from concurrent.futures import ThreadPoolExecutor

from r2connectedness import logger


def parallel_map(func, items, threads=1) -> list:
    """ Apply `func` to every item, keeping input order in the result.

    Results are collected by position, never by completion, so the output is
    the same for any number of workers. `threads=1` runs inline.
    """
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    workers = min(threads, len(items))
    logger.debug(f"Running {len(items)} jobs on {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(func, items))
