import sys
from typing import List, Optional, TextIO

from squeeze.internal.logger.destinations import Destination
from squeeze.internal.logger.types import LogPart
from squeeze.internal.util.colors import styled


class ConsoleDestination(Destination):
    """
    Writes log lines to the error stream, styled only when it is a terminal
    """

    def __init__(self, stream: Optional[TextIO] = None):
        self._stream = stream

    @property
    def stream(self) -> TextIO:
        # looked up on every write so that a redirected stderr is used
        return self._stream if self._stream is not None else sys.stderr

    def _is_styled(self) -> bool:
        isatty = getattr(self.stream, 'isatty', None)
        return bool(isatty is not None and isatty())

    def log(self, parts: List[LogPart], *,
            is_new_line: bool):
        is_styled = self._is_styled()
        text = []
        for p in parts:
            if isinstance(p, str):
                text.append(p)
            elif is_styled:
                text.append(styled(str(p[0]), p[1]))
            else:
                text.append(str(p[0]))

        self.stream.write(''.join(text) + ('\n' if is_new_line else ''))
        self.stream.flush()
