from typing import Callable, Iterable
from functools import wraps
from concurrent.futures import ThreadPoolExecutor


def threaded_map(data_list: Iterable, max_workers: int = None):
    """
    A decorator that executes the decorated function in parallel threads
    for each element in the provided iterable.

    Results are returned in input order no matter which thread finished
    first, and the first exception raised by any item is re-raised.

    Args:
        data_list: The items to process
        max_workers: Maximum number of threads to use; 1 runs inline
    """

    def decorator(func: Callable):
        @wraps(func)
        def wrapper(*args, **kwargs):
            items = list(data_list)
            if max_workers == 1 or len(items) <= 1:
                return [func(item, *args, **kwargs) for item in items]

            with ThreadPoolExecutor(max_workers=max_workers) as executor:
                futures = [
                    executor.submit(func, item, *args, **kwargs) for item in items
                ]
                return [future.result() for future in futures]

        return wrapper

    return decorator
