from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from utils.config import MAX_WORKERS
from utils.logging_config import get_component_logger

logger = get_component_logger("performance")

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(
    func: Callable[[T], R],
    items: Iterable[T],
    max_workers: Optional[int] = None,
) -> List[R]:
    """Apply ``func`` to every item on a thread pool, results in input order.

    Work items must not share mutable state. The first exception raised by
    a worker is re-raised here after the pool shuts down.
    """
    items = list(items)
    if len(items) <= 1:
        return [func(item) for item in items]

    workers = min(max_workers or MAX_WORKERS, len(items))
    logger.debug(f"Dispatching {len(items)} jobs to {workers} worker threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
