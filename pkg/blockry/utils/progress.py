from typing import Optional, TypedDict, Union, Dict, Any
from collections.abc import Callable

from tqdm import tqdm


class TqdmState(TypedDict, total=False):
    """
    Subset of `tqdm.format_dict` handed to progress callbacks.

    - n (int): Completed iterations.
    - total (Optional[int]): Iteration budget, None if unknown.
    - elapsed (float): Seconds since the bar was created.
    - prefix (Optional[str]): Description passed as `desc`.
    - rate (Optional[float]): Iterations per second, None before the first update.
    - postfix (Optional[Union[str, Dict[str, Any]]]): Text set through `set_postfix()`.
    """

    n: int
    total: Optional[int]
    elapsed: float
    prefix: Optional[str]
    rate: Optional[float]
    postfix: Optional[Union[str, Dict[str, Any]]]


class IterationTqdm(tqdm):
    """
    Progress bar over solver iterations that also forwards its state to a
    callback, with the same refresh throttling as the terminal output.

    Parameters
    ----------
    broadcast_func : callable, optional
        Called with `format_dict` every time the bar is redrawn.
    """

    def __init__(
        self,
        *args,
        broadcast_func: Optional[Callable[[TqdmState], None]] = None,
        **kwargs,
    ):
        self.broadcast_func = broadcast_func
        kwargs.setdefault("unit", "it")
        kwargs.setdefault("leave", False)
        super().__init__(*args, **kwargs)

    def display(self, msg=None, pos=None):
        super().display(msg=msg, pos=pos)
        self._broadcast_state()

    def _broadcast_state(self):
        if self.broadcast_func is None:
            return
        self.broadcast_func(self.format_dict)
