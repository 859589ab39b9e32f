from typing import List

from squeeze.internal.logger.types import LogPart


class Destination:
    def log(self, parts: List[LogPart], *,
            is_new_line: bool):
        raise NotImplementedError()
