"""
Runs per-item work on a thread pool while keeping output order deterministic.

Searches for different queries and tokenization of different passages are
independent, so they may run concurrently. Results always come back in input
order, whatever the number of workers, so run files never depend on the
`workers` setting.
"""
import logging
from concurrent.futures import ThreadPoolExecutor

logger = logging.getLogger(__name__)


def run_ordered(target_func, items, workers=1):
    """
    Applies `target_func` to every item and returns the results in input order.

    Args:
        target_func (callable): Function of one argument. Must not mutate
            shared state.
        items (iterable): Inputs.
        workers (int): Thread count; 1 runs inline in the calling thread.

    Returns:
        list: target_func(item) for each item, in the order of `items`.

    Raises:
        Exception: The first exception raised by `target_func`, after it has
            been logged with the name of the failing function.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [target_func(item) for item in items]

    def wrapped_target(item):
        try:
            return target_func(item)
        except Exception as e:
            # Exceptions inside worker threads would otherwise surface without context.
            logger.error(
                f"Exception in worker thread for function '{target_func.__name__}': {e}",
                extra={'function': target_func.__name__}
            )
            raise

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(wrapped_target, items))
