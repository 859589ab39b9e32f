import math
from typing import TYPE_CHECKING, List

import numpy

from squeeze.internal.util.colors import StyleCode
from .types import LogPart
from ...logger import Text, Level

if TYPE_CHECKING:
    from . import Logger


def _format_int(value: int):
    return f"{value:,}"


def _format_float(value: float):
    if abs(value) < 1e-9:
        lg = 0
    else:
        lg = int(math.ceil(math.log10(abs(value)))) + 1

    decimals = 7 - lg
    decimals = max(1, decimals)
    decimals = min(6, decimals)

    fmt = "{v:,." + str(decimals) + "f}"
    return fmt.format(v=value)


def format_value(value: any):
    if isinstance(value, bool):
        return str(value)
    elif isinstance(value, int):
        return _format_int(value)
    elif isinstance(value, float):
        return _format_float(value)
    elif isinstance(value, numpy.number) and numpy.issubdtype(value, numpy.integer):
        return _format_int(int(value))
    elif isinstance(value, numpy.number) and numpy.issubdtype(value, numpy.floating):
        if numpy.isnan(value):
            return 'NaN'
        return _format_float(float(value))
    else:
        return str(value)


def key_value_pair(key: any, value: any, style: StyleCode = Text.meta) -> List[LogPart]:
    return [(f'{str(key)}: ', Text.subtle),
            (format_value(value), style)]


class Inspect:
    def __init__(self, logger: 'Logger'):
        self.__logger = logger

    def info(self, items: dict):
        width = max([len(str(k)) for k in items.keys()], default=0)
        for k, v in items.items():
            parts = key_value_pair(str(k).rjust(width), v, Text.value)
            self.__logger.log(parts, is_new_line=True, level=Level.info)
