from __future__ import annotations
import enum
from typing import Union, Any, TypeVar, Type


ET = TypeVar("ET", bound="DataEnum")


class DataEnum(enum.Enum):
    """
    Base class for the string-valued enums of blockry.
    Members can be looked up by the member itself, its name, its value or
    the "ClassName.NAME" text, which keeps CLI arguments and JSON input
    tolerant.

    Example:
    ```python
    class Color(DataEnum):
        RED = "red"

    Color.interfere("RED") is Color.interfere("red") is Color.RED
    ```
    """

    def __init_subclass__(cls) -> None:
        cls._lookup = {}
        for member in cls:
            cls._lookup[member.name] = member
            try:
                if member.value not in cls._lookup:
                    cls._lookup[member.value] = member
            except TypeError:
                pass
            if str(member.value) not in cls._lookup:
                cls._lookup[str(member.value)] = member

    @classmethod
    def interfere(cls: Type[ET], a: Union[ET, str, Any]) -> ET:
        if isinstance(a, cls):
            return a
        try:
            if a in cls._lookup:
                return cls._lookup[a]
        except TypeError:
            pass
        try:
            return cls(a)
        except ValueError as e:
            if isinstance(a, str) and a.startswith(cls.__name__ + "."):
                key = a[len(cls.__name__) + 1 :]
                if key in cls._lookup:
                    return cls._lookup[key]
            raise e

    @classmethod
    def v(cls: Type[ET], a: Union[ET, str, Any]) -> Any:
        return cls.interfere(a).value


class StagnationCase(DataEnum):
    """
    How the newest Arnoldi block contributes to the block GMRES update.
    """

    FOM_EXISTS = "FomExists"
    PARTIAL_CONTRIBUTION = "PartialContribution"
    TOTAL_STAGNATION = "TotalStagnation"


class ExperimentName(DataEnum):
    TOTAL_STAG = "total-stag"
    PARTIAL_STAG = "partial-stag"
    SHERMAN4_MIXED = "sherman4-mixed"
