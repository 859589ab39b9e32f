import threading
from typing import Optional, List

from .sections import Section
from ..logger import logger_singleton as logger
from ...logger import Level


class Monitor:
    """
    Stack of open sections. Only the thread that created the monitor logs;
    sections opened from worker threads are silent.
    """

    def __init__(self):
        self._sections: List[Section] = []
        self._owner = threading.get_ident()

    def section(self, name, *,
                is_silent: bool,
                is_timed: bool,
                is_children_silent: bool,
                total_steps: float) -> Section:
        if threading.get_ident() != self._owner:
            return Section(monitor=_SILENT_MONITOR, name=name, is_silent=True,
                           is_timed=is_timed, is_children_silent=True,
                           total_steps=total_steps, level=0)

        if self._sections:
            parent = self._sections[-1]
            if parent.is_silent or parent.is_children_silent:
                is_silent = True
                is_children_silent = True

        section = Section(monitor=self, name=name, is_silent=is_silent, is_timed=is_timed,
                          is_children_silent=is_children_silent, total_steps=total_steps,
                          level=len(self._sections))
        self._sections.append(section)
        return section

    def progress(self, steps: float):
        if not self._sections:
            raise RuntimeError("Progress reported outside of a section")
        if self._sections[-1].progress(steps):
            self._log_line(is_new_line=False)

    def section_enter(self, section: Section):
        if not self._sections or section is not self._sections[-1]:
            raise RuntimeError("Entering a section other than the last one created; "
                               "use `with monit.section(...):`")

        # the parent's progress line is still open
        if len(self._sections) > 1 and not self._sections[-2].is_parented:
            self._sections[-2].is_parented = True
            if not section.is_silent:
                logger().log([], level=Level.info)

        self._log_line(is_new_line=False)

    def section_exit(self, section: Section):
        if not self._sections or section is not self._sections[-1]:
            raise RuntimeError(f"Section {section.name} exited out of order")

        self._log_line(is_new_line=True)
        self._sections.pop()

    def _log_line(self, *, is_new_line: bool):
        parts = self._sections[-1].log()
        if parts is None:
            return
        logger().log(['\r'] + parts, is_new_line=is_new_line, level=Level.info)


class _SilentMonitor:
    def section_enter(self, section: Section):
        pass

    def section_exit(self, section: Section):
        pass


_SILENT_MONITOR = _SilentMonitor()

_internal: Optional[Monitor] = None


def monitor_singleton() -> Monitor:
    global _internal
    if _internal is None:
        _internal = Monitor()

    return _internal
