from concurrent.futures import ThreadPoolExecutor

from loguru import logger

from skram.utils.skram_config import SkramConfig


class PathPool():
    """ Evaluates independent table cells on a bounded pool of workers."""

    def __init__(self, name, maxWorkers=None):
        """Initialize function.
            Parameters
            ----------
            name: str
                label used in the log messages.
            maxWorkers: int
                worker cap, defaults to ``SkramConfig.max_threads``.
        """
        self.name = name
        self.maxWorkers = maxWorkers if maxWorkers else SkramConfig.max_threads

    def map(self, func, items):
        """Run ``func`` on every item.

            Results come back in submission order so reductions do not depend on the worker cap.

            Parameters
            ----------
            func: callable
                function of one item.
            items: list
                the cells to evaluate.

            Returns
            -------
            list:
                one result per item.
        """
        items = list(items)
        if self.maxWorkers <= 1 or len(items) <= 1:
            return [func(item) for item in items]
        logger.debug(f"Pool<{self.name}> runs {len(items)} cells on {self.maxWorkers} workers")
        with ThreadPoolExecutor(max_workers=self.maxWorkers, thread_name_prefix=self.name) as pool:
            futures = [pool.submit(func, item) for item in items]
            return [future.result() for future in futures]
