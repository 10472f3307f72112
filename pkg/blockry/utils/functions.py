from concurrent.futures import ProcessPoolExecutor
from multiprocessing import get_context
from typing import Callable, Iterable, List, Optional, TypeVar

import dill

T = TypeVar("T")
R = TypeVar("R")


class DillProcessPoolExecutor(ProcessPoolExecutor):
    """
    A ProcessPoolExecutor that pickles callables, arguments and results with
    dill, so closures and locally defined functions can be shipped to workers.
    """

    def __init__(self, *args, **kwargs):
        kwargs["mp_context"] = get_context("spawn")
        super().__init__(*args, **kwargs)

    def submit(self, func, /, *args, **kwargs):
        func_dill = dill.dumps(func)
        args_dill = dill.dumps((args, kwargs))
        return super().submit(self._dill_worker, func_dill, args_dill)

    @staticmethod
    def _dill_worker(func_dill, args_dill):
        func = dill.loads(func_dill)
        args, kwargs = dill.loads(args_dill)
        return dill.dumps(func(*args, **kwargs))


def run_in_processes(
    func: Callable[[T], R],
    items: Iterable[T],
    max_workers: Optional[int] = None,
) -> List[R]:
    """
    Applies `func` to every item in separate processes and returns the
    results in input order.

    Args:
        func (Callable[[T], R]): Function applied to each item.
        items (Iterable[T]): Inputs, one task per item.
        max_workers (Optional[int]): Pool size, by default one per item.

    Returns:
        List[R]: The results in the order of `items`.

    Example:
        >>> run_in_processes(abs, [-1, -2])
        [1, 2]
    """
    items = list(items)
    if not items:
        return []
    if max_workers is None:
        max_workers = len(items)
    with DillProcessPoolExecutor(max_workers=max_workers) as executor:
        futures = [executor.submit(func, item) for item in items]
        return [dill.loads(future.result()) for future in futures]
