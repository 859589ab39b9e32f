"""
Timed sections with progress for long steps such as calibration and
per-layer quantization. Section lines go to the log at ``info`` level.
"""
from squeeze.internal.monitor import monitor_singleton as _internal
from squeeze.internal.monitor.sections import Section


def section(name: str, *,
            is_silent: bool = False,
            is_timed: bool = True,
            is_children_silent: bool = False,
            total_steps: float = 1.0) -> Section:
    r"""
    Logs ``name...[DONE]`` with the elapsed time when the block finishes,
    or ``name...[FAIL]`` when it raises.

    Example::
        >>> with monit.section('Quantize layers', total_steps=len(model)):
        ...     for i in range(len(model)):
        ...         quantize(i)
        ...         monit.progress(i + 1)
    """
    return _internal().section(name, is_silent=is_silent,
                               is_timed=is_timed,
                               total_steps=total_steps,
                               is_children_silent=is_children_silent)


def progress(steps: float):
    r"""
    Number of steps of the innermost section completed so far
    """
    _internal().progress(steps)
