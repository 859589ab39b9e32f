import os
from typing import Optional, List

from .destinations.console import ConsoleDestination
from .inspect import Inspect
from .types import LogPart
from ...logger import Level

ENV_LOG_LEVEL = 'SQUEEZE_LOG'


def _level_from_env() -> (Level, Optional[str]):
    value = os.environ.get(ENV_LOG_LEVEL)
    if value is None or value == '':
        return Level.info, None
    try:
        return Level(value.strip().lower()), None
    except ValueError:
        return Level.info, value


class Logger:
    """
    Filters log parts by level and hands them to the console destination
    """

    def __init__(self):
        self.__destination = ConsoleDestination()
        self.__inspect = Inspect(self)
        self.level, unknown = _level_from_env()
        if unknown is not None:
            self.log([(f"Unknown {ENV_LOG_LEVEL} value ", None),
                      (repr(unknown), None),
                      ("; using info", None)], is_new_line=True, level=Level.error)

    def is_enabled(self, level: Level) -> bool:
        return level.rank <= self.level.rank

    def log(self, parts: List[LogPart], *,
            is_new_line: bool = True,
            level: Level = Level.info):
        if not self.is_enabled(level):
            return
        self.__destination.log(parts, is_new_line=is_new_line)

    def info(self, items: dict):
        self.__inspect.info(items)


_internal: Optional[Logger] = None


def logger_singleton() -> Logger:
    global _internal
    if _internal is None:
        _internal = Logger()

    return _internal
