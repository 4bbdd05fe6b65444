from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

from tqdm import tqdm

from patchscale.config.state import State

T = TypeVar("T")
R = TypeVar("R")


class WorkerPool:
    """Process pool whose results come back in submission order.

    `jobs=1` runs in-process; anything wider uses a ProcessPoolExecutor, so
    `fn` and the items must be picklable.
    """

    def __init__(self, jobs: int = 1, progress: bool | None = None):
        if jobs < 1:
            raise ValueError("jobs must be >= 1")
        self.jobs = jobs
        self.progress = State.get_settings().progress if progress is None else progress

    def map(self, fn: Callable[[T], R], items: Iterable[T], desc: str = "working") -> list[R]:
        items = list(items)
        with tqdm(total=len(items), desc=desc, unit="item", disable=not self.progress) as pbar:
            if self.jobs == 1 or len(items) <= 1:
                results = []
                for item in items:
                    results.append(fn(item))
                    _ = pbar.update(1)
                return results

            State.logger.debug(f"Dispatching {len(items)} items to {self.jobs} workers")
            chunksize = max(1, len(items) // (self.jobs * 4))
            results = []
            with ProcessPoolExecutor(max_workers=self.jobs) as executor:
                for result in executor.map(fn, items, chunksize=chunksize):
                    results.append(result)
                    _ = pbar.update(1)
            return results
