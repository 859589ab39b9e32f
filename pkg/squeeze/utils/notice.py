from typing import Union, List, Tuple

from squeeze import logger
from squeeze.internal.util.colors import StyleCode
from squeeze.logger import Text, Level

_RULE = '-' * 50

_TITLES = {
    Level.error: ('SQUEEZE ERROR', [Text.danger, Text.title]),
    Level.info: ('SQUEEZE WARNING', [Text.warning, Text.title]),
}


def squeeze_notice(message: Union[str, List[Union[str, Tuple[str, StyleCode]]]], *,
                   level: Level = Level.info):
    r"""
    Logs ``message`` inside a banner.

    Sweeps use it when an expected trend does not show on the measured model;
    such observations never fail a run.
    """
    title, style = _TITLES.get(level, _TITLES[Level.info])
    parts = [('\n' + _RULE, Text.subtle), (f'\n{title}\n', style)]
    if isinstance(message, str):
        parts.append(message)
    else:
        parts += message
    parts.append(('\n' + _RULE, Text.subtle))
    logger.log(parts, level=level)
