from typing import Any, MutableMapping, TypeVar
from copy import deepcopy

T = TypeVar("T", bound=MutableMapping[Any, Any])


def deep_fill_dict(
    target_dict: T,
    source_dict: T,
    overwrite_existing: bool = False,
    inplace: bool = True,
) -> T:
    """
    deep_fill_dict
    Recursively copies every key of source_dict that target_dict is missing.
    Nested dicts are merged key by key, other values are taken as a whole.

    Parameters
    ----------
    target_dict : MutableMapping
        The mapping to be completed, e.g. a configuration read from disk
    source_dict : MutableMapping
        The mapping providing the defaults
    overwrite_existing : bool, optional
        If true, values already present in the target are replaced, by default False
    inplace : bool, optional
        If false, a deep copy of the target is completed instead, by default True

    Returns
    -------
    MutableMapping
        The completed mapping
    """
    if not inplace:
        target_dict = deepcopy(target_dict)

    for key, value in source_dict.items():
        if isinstance(value, dict):
            node = target_dict.setdefault(key, {})
            if isinstance(node, dict):
                deep_fill_dict(node, value, overwrite_existing=overwrite_existing)
                continue
        if overwrite_existing or key not in target_dict:
            target_dict[key] = deepcopy(value)

    return target_dict
