from typing import Callable, Any, Union, Dict, List, Optional
import dataclasses
import enum
import json
import math

import numpy as np


@dataclasses.dataclass
class Encdata:
    data: Any
    done: bool = False
    handeled: bool = False


encodertype = Callable[[Any], Union[tuple[Any, bool], Encdata]]


class JSONEncoder(json.JSONEncoder):
    """
    JSON encoder dispatching on a per-type registry of encoder functions.

    Encoders are looked up along the MRO of the object; the first one that
    reports the object as handled wins. Unless it marks its result as done,
    the returned data is encoded again, so encoders may return containers
    of arrays, enums or further dataclasses.
    """

    encoder_registry: Dict[type, List[encodertype]] = {}

    @classmethod
    def add_encoder(cls, enc: encodertype, enc_cls: Optional[List[type]] = None):
        """
        Registers an encoder.

        Args:
          enc (encodertype): Function taking an object and returning either an
            Encdata or a tuple (encoded object, handled flag).
          enc_cls (Optional[List[type]]): Types the encoder is registered for,
            `object` when omitted.

        Examples:
          >>> def complex_encoder(obj):
          ...     if isinstance(obj, complex):
          ...         return [obj.real, obj.imag], True
          ...     return obj, False
          >>> JSONEncoder.add_encoder(complex_encoder, [complex])
        """
        if enc_cls is None:
            enc_cls = [object]
        for _enc_cls in enc_cls:
            cls.encoder_registry.setdefault(_enc_cls, []).append(enc)

    @classmethod
    def apply_custom_encoding(cls, obj, seen=None):
        """
        Recursively converts `obj` into JSON-compatible builtins.
        Non-finite floats become None.
        """
        if seen is None:
            seen = set()

        obj_id = id(obj)
        if obj_id in seen:
            raise ValueError("Circular reference detected.")
        seen.add(obj_id)

        try:
            for base in type(obj).__mro__:
                for enc in cls.encoder_registry.get(base, ()):
                    encres = enc(obj)
                    if not isinstance(encres, Encdata):
                        res, handled = encres
                        encres = Encdata(data=res, handeled=handled)
                    if encres.handeled:
                        if encres.done:
                            return encres.data
                        return cls.apply_custom_encoding(encres.data, seen=seen)

            if isinstance(obj, bool) or obj is None:
                return obj
            if isinstance(obj, (int, float)):
                if isinstance(obj, float) and not math.isfinite(obj):
                    return None
                return obj
            if isinstance(obj, str):
                return obj
            if isinstance(obj, dict):
                return {
                    str(key): cls.apply_custom_encoding(value, seen=seen)
                    for key, value in obj.items()
                }
            if isinstance(obj, (set, frozenset, tuple, list)):
                return [cls.apply_custom_encoding(item, seen=seen) for item in obj]

            return str(obj)
        finally:
            seen.remove(obj_id)

    def default(self, obj):
        return self.apply_custom_encoding(obj)

    def encode(self, o):
        return super().encode(self.apply_custom_encoding(o))


def numpy_handler(obj):
    """
    Encodes numpy arrays as nested lists and numpy scalars as Python numbers.
    """
    if isinstance(obj, np.ndarray):
        return Encdata(data=obj.tolist(), handeled=True)
    if isinstance(obj, np.generic):
        return Encdata(data=obj.item(), handeled=True)
    return Encdata(data=obj, handeled=False)


JSONEncoder.add_encoder(numpy_handler, [np.ndarray, np.generic])


def enum_handler(obj):
    """
    Encodes enum members by their value.
    """
    if isinstance(obj, enum.Enum):
        return Encdata(data=obj.value, handeled=True)
    return Encdata(data=obj, handeled=False)


JSONEncoder.add_encoder(enum_handler, [enum.Enum])


def dataclass_handler(obj):
    """
    Encodes dataclass instances field by field (without deep-copying arrays).
    """
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return Encdata(
            data={f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)},
            handeled=True,
        )
    return Encdata(data=obj, handeled=False)


JSONEncoder.add_encoder(dataclass_handler)


def to_json(obj: Any, indent: Optional[int] = 2) -> str:
    """
    Serializes `obj` with the blockry JSONEncoder.

    Examples:
      >>> to_json({"sines": np.array([1.0, np.nan])}, indent=None)
      '{"sines": [1.0, null]}'
    """
    return json.dumps(obj, cls=JSONEncoder, indent=indent)
