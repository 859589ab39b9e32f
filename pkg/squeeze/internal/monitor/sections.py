import math
import time
from enum import Enum
from typing import TYPE_CHECKING, Optional, List

from ..logger.types import LogPart
from ...logger import Text

if TYPE_CHECKING:
    from . import Monitor


class SectionState(Enum):
    created = 'created'
    running = 'running'
    done = 'done'
    failed = 'failed'


class Section:
    r"""
    A timed block of work; create it with :func:`squeeze.monit.section`
    """

    def __init__(self, *,
                 monitor: 'Monitor',
                 name: str,
                 is_silent: bool,
                 is_timed: bool,
                 is_children_silent: bool,
                 total_steps: float,
                 level: int):
        self.name = name
        self.level = level
        self.is_silent = is_silent
        self.is_children_silent = is_children_silent
        self.is_parented = False

        self._monitor = monitor
        self._is_timed = is_timed
        self._total_steps = total_steps
        self._state = SectionState.created
        self._start = 0.
        self._end = 0.
        self._fraction = 0.

    @property
    def state(self) -> SectionState:
        return self._state

    @property
    def elapsed(self) -> float:
        end = time.perf_counter() if self._state is SectionState.running else self._end
        return end - self._start

    def __enter__(self):
        self._state = SectionState.running
        self._fraction = 0.
        self._start = time.perf_counter()
        self._monitor.section_enter(self)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self._end = time.perf_counter()
        self._state = SectionState.failed if exc_val is not None else SectionState.done
        self._fraction = 1.
        self._monitor.section_exit(self)

    def progress(self, steps: float) -> bool:
        r"""
        Returns ``True`` when the shown percentage changes
        """
        percent = math.floor(self._fraction * 100)
        self._fraction = steps / self._total_steps
        return not self.is_silent and math.floor(self._fraction * 100) != percent

    def log(self) -> Optional[List[LogPart]]:
        if self.is_silent or self._state is SectionState.created:
            return None

        parts: List[LogPart] = ['  ' * self.level + self.name]
        if self._state is SectionState.running:
            if self._fraction == 0.:
                parts.append('...')
            else:
                parts.append((f' {math.floor(self._fraction * 100):4.0f}%', Text.meta2))
            return parts

        if self._state is SectionState.done:
            parts.append(('...[DONE]', Text.success))
        else:
            parts.append(('...[FAIL]', Text.danger))
        if self._is_timed:
            parts.append((f'\t{1000 * self.elapsed:,.2f}ms', Text.meta))
        return parts
