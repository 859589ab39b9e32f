"""
ANSI escape sequences for console styles
"""
from enum import Enum
from typing import List, Optional, Union

ANSI_RESET = '\33[0m'

_SGR = {
    'normal': 0,
    'bold': 1,
    'light': 2,
    'underline': 4,
    'black': 30,
    'red': 31,
    'green': 32,
    'orange': 33,
    'blue': 34,
    'purple': 35,
    'cyan': 36,
    'white': 37,
}


class StyleCode(Enum):
    r"""
    Base of the style enumerations in :mod:`squeeze.logger`.
    A member's value is a style name, a list of names or ``None``.
    """

    def names(self) -> List[str]:
        if self.value is None:
            return ['normal']
        if isinstance(self.value, str):
            return [self.value]
        return list(self.value)

    def ansi(self) -> str:
        return ''.join(f'\33[{_SGR[n]}m' for n in self.names())


def styled(text: str, styles: Optional[Union[StyleCode, List[StyleCode]]]) -> str:
    if styles is None:
        return text
    if isinstance(styles, StyleCode):
        styles = [styles]
    return ''.join(s.ansi() for s in styles) + text + ANSI_RESET
