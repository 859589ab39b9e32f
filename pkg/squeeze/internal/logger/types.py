from typing import Optional, Union, Tuple

from squeeze.internal.util.colors import StyleCode

LogPart = Union[str, Tuple[str, Optional[StyleCode]]]
